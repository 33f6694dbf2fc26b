"""Linear scan register allocation (Poletto and Sarkar) with spill rewriting.

:func:`linear_scan` is the bare algorithm over abstract registers
``0..k-1``.  :func:`allocate_registers` runs it once per register class,
sends values live across calls to the frame (every call clobbers every
register) and rewrites spilled operands through the scratch registers.
"""
from __future__ import annotations

import bisect

from ..jit.x86 import (R8, R9, R10, R11, R12, R13, R14, R15, RAX, RBX, RCX,
                       RDI, RDX, RSI, XMM)
from .liveness import call_positions, compute_live_intervals, crossing_calls
from .mach import FLT, INT, Instr, MachFn, Slot, VReg

INT_REGS = (RAX, RBX, RCX, RDX, RSI, RDI, R8, R9, R10, R12, R13)
FLOAT_REGS = tuple(XMM[:15])
INT_SCRATCH = (R11, R15, R14)
FLOAT_SCRATCH = XMM[15]

# operations whose operands may name frame slots directly
SLOT_OK = frozenset({"getargs", "move", "const", "call", "callind", "extcall", "ret", "alloc"})


def linear_scan(intervals, k: int):
    """Assign ``k`` registers to ``intervals`` (objects with ``start``/``end``).

    Returns ``(assignment, spilled)``: a dict interval -> register index and
    the set of spilled intervals.  When no register is free the interval
    with the furthest end among the active ones and the current one spills.
    """
    order = sorted(intervals, key=lambda i: (i.start, i.end))
    assignment: dict = {}
    spilled: set = set()
    active: list = []  # (end, seq, interval), sorted
    free = list(range(k))
    for seq, cur in enumerate(order):
        while active and active[0][0] < cur.start:
            _, _, done = active.pop(0)
            bisect.insort(free, assignment[done])
        if free:
            assignment[cur] = free.pop(0)
            bisect.insort(active, (cur.end, seq, cur))
            continue
        if k == 0:
            spilled.add(cur)
            continue
        end, _, victim = active[-1]
        if end > cur.end:
            assignment[cur] = assignment.pop(victim)
            spilled.add(victim)
            active.pop()
            bisect.insort(active, (cur.end, seq, cur))
        else:
            spilled.add(cur)
    return assignment, spilled


class _Key:
    """Hashable wrapper so equal intervals stay distinct."""
    __slots__ = ("start", "end", "iv")

    def __init__(self, iv):
        self.start, self.end, self.iv = iv.start, iv.end, iv


def allocate_registers(f: MachFn, intervals=None, mode: str = "linear",
                       int_regs=INT_REGS, float_regs=FLOAT_REGS) -> MachFn:
    """Replace virtual registers by physical registers and frame slots."""
    if intervals is None:
        intervals = compute_live_intervals(f)
    loc: dict = {}
    slots: dict = {}

    def spill(v: VReg):
        if v not in slots:
            slots[v] = Slot(len(slots), v.cls)
        loc[v] = slots[v]

    if mode == "spill_all":
        for iv in intervals:
            spill(iv.vreg)
    else:
        forced = crossing_calls(intervals, call_positions(f))
        for cls, regs in ((INT, int_regs), (FLT, float_regs)):
            keys = [_Key(iv) for iv in intervals if iv.vreg.cls == cls and iv.vreg not in forced]
            assignment, spilled = linear_scan(keys, len(regs))
            for key, r in assignment.items():
                loc[key.iv.vreg] = regs[r]
            for key in spilled:
                spill(key.iv.vreg)
        for iv in intervals:
            if iv.vreg in forced:
                spill(iv.vreg)
    for b in f.blocks.values():
        body = []
        for ins in b.body:
            body.extend(rewrite(ins, loc))
        b.body = body
        term = rewrite(b.term, loc)
        b.body.extend(term[:-1])
        b.term = term[-1]
    f.frame_slots = len(slots)
    return f


def rewrite(ins: Instr, loc: dict) -> list:
    """Map operands to locations, adding reloads and spill stores as needed."""
    if ins.op in SLOT_OK:
        return [ins.replace(tuple(loc[v] for v in ins.d), tuple(loc[v] for v in ins.s))]
    before, after = [], []
    scratch: dict = {}
    ints = iter(INT_SCRATCH)
    s = []
    for k, v in enumerate(ins.s):
        where = loc[v]
        if not isinstance(where, Slot):
            s.append(where)
        elif ins.op == "fop" and k == 1:
            s.append(where)  # SSE arithmetic takes a memory operand
        else:
            if v not in scratch:
                scratch[v] = FLOAT_SCRATCH if v.cls == FLT else next(ints)
                before.append(Instr("move", (scratch[v],), (where,)))
            s.append(scratch[v])
    d = []
    for v in ins.d:
        where = loc[v]
        if not isinstance(where, Slot):
            d.append(where)
            continue
        r = scratch.get(v) or (FLOAT_SCRATCH if v.cls == FLT else INT_SCRATCH[0])
        d.append(r)
        after.append(Instr("move", (where,), (r,)))
    return before + [ins.replace(tuple(d), tuple(s))] + after

