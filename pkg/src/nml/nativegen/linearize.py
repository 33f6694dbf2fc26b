"""Linearization: allocated Mach CFG -> ordered instruction list with labels.

Blocks keep their layout order.  A jump to the next block disappears; a
conditional branch falls through to whichever successor comes next, with
the condition negated when that is the true branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..jit.x86 import NEGATE
from .mach import Instr, MachFn, VReg, show_instr


@dataclass
class LinearFn:
    """Instructions plus ``label``, ``jmp`` and ``condjump`` (compare, then jcc)."""
    name: str
    instrs: list = field(default_factory=list)
    frame_slots: int = 0
    global_: bool = False

    @property
    def frame_size(self) -> int:
        """Bytes reserved below the return address; keeps calls 16-byte aligned."""
        size = 24 + 8 * self.frame_slots
        return size + 8 if size % 16 == 0 else size

    def labels(self) -> list:
        return [i.a for i in self.instrs if i.op == "label"]

    def validate(self):
        labels = set(self.labels())
        for i in self.instrs:
            if any(isinstance(x, VReg) for x in i.d + i.s):
                raise ValueError(f"{self.name}: virtual register left in {show_instr(i)}")
            if i.op == "jmp" and i.a not in labels:
                raise ValueError(f"{self.name}: jump to missing L{i.a}")
            if i.op == "condjump" and i.a[2] not in labels:
                raise ValueError(f"{self.name}: branch to missing L{i.a[2]}")
        if self.frame_size % 16 != 8:
            raise ValueError("misaligned frame")


def linearize(f: MachFn) -> LinearFn:
    out = []
    order = f.order
    for k, label in enumerate(order):
        b = f.blocks[label]
        nxt = order[k + 1] if k + 1 < len(order) else None
        out.append(Instr("label", a=label))
        out.extend(b.body)
        t = b.term
        if t.op == "jmp":
            if t.a != nxt:
                out.append(Instr("jmp", a=t.a))
        elif t.op == "cbr":
            cond, imm, yes, no = t.a
            if no == nxt:
                out.append(Instr("condjump", (), t.s, (cond, imm, yes)))
            elif yes == nxt:
                out.append(Instr("condjump", (), t.s, (NEGATE[cond], imm, no)))
            else:
                out.append(Instr("condjump", (), t.s, (cond, imm, yes)))
                out.append(Instr("jmp", a=no))
        else:
            out.append(t)
    return LinearFn(f.name, out, f.frame_slots, f.global_)


def show_linear(i: Instr) -> str:
    if i.op == "label":
        return f"L{i.a}:"
    if i.op == "jmp":
        return f"  jmp L{i.a}"
    if i.op == "condjump":
        cond, imm, target = i.a
        rhs = repr(i.s[1]) if len(i.s) > 1 else str(imm)
        return f"  if {i.s[0]!r} {cond} {rhs} goto L{target}"
    return "  " + show_instr(i)


def dump_linear(f: LinearFn) -> str:
    head = f'function "{f.name}" frame={f.frame_size}'
    return "\n".join([head] + [show_linear(i) for i in f.instrs])


def reconstruct_cfg(f: LinearFn) -> dict:
    """Successor map recovered from the branch structure alone."""
    succ: dict = {}
    cur = None
    fall = True
    for i in f.instrs:
        if i.op == "label":
            if cur is not None and fall:
                succ[cur].append(i.a)
            cur, fall = i.a, True
            succ[cur] = []
        elif i.op == "jmp":
            if fall:
                succ[cur].append(i.a)
            fall = False
        elif i.op == "condjump":
            succ[cur].append(i.a[2])
        elif i.op in ("ret", "trap"):
            fall = False
    return {k: sorted(set(v)) for k, v in succ.items()}


