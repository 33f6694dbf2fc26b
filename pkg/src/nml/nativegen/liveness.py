"""Dataflow liveness and live intervals over the layout numbering.

Instructions are numbered consecutively in block layout order (terminators
included).  An interval is the hull of every position where its register is
defined, used, or live across a block boundary, so holes are filled and
values live around a loop cover the whole loop.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass

from .mach import CLOBBERING, MachFn, VReg


@dataclass
class LiveInterval:
    vreg: VReg
    start: int
    end: int

    def overlaps(self, other: "LiveInterval") -> bool:
        return self.start <= other.end and other.start <= self.end


def _vregs(xs):
    return [x for x in xs if isinstance(x, VReg)]


def block_sets(f: MachFn):
    use, defs = {}, {}
    for b in f.layout():
        u, d = set(), set()
        for ins in b.instrs():
            for v in _vregs(ins.s):
                if v not in d:
                    u.add(v)
            d.update(_vregs(ins.d))
        use[b.label], defs[b.label] = u, d
    return use, defs


def liveness(f: MachFn):
    """Iterate ``in = use | (out - def)``, ``out = union of successors' in``."""
    use, defs = block_sets(f)
    live_in = {b: set() for b in f.order}
    live_out = {b: set() for b in f.order}
    changed = True
    while changed:
        changed = False
        for b in reversed(f.order):
            out = set()
            for s in f.successors(b):
                out |= live_in[s]
            inn = use[b] | (out - defs[b])
            if out != live_out[b] or inn != live_in[b]:
                live_out[b], live_in[b] = out, inn
                changed = True
    return live_in, live_out


def number(f: MachFn) -> dict:
    """Block label -> (first position, last position)."""
    pos, spans = 0, {}
    for b in f.layout():
        n = len(b.body) + 1
        spans[b.label] = (pos, pos + n - 1)
        pos += n
    return spans


def compute_live_intervals(f: MachFn) -> list:
    live_in, live_out = liveness(f)
    spans = number(f)
    lo: dict = {}
    hi: dict = {}

    def touch(v, p):
        if v not in lo or p < lo[v]:
            lo[v] = p
        if v not in hi or p > hi[v]:
            hi[v] = p

    for b in f.layout():
        first, last = spans[b.label]
        for v in live_in[b.label]:
            touch(v, first)
        for v in live_out[b.label]:
            touch(v, last)
        for k, ins in enumerate(b.instrs()):
            for v in _vregs(ins.d + ins.s):
                touch(v, first + k)
    out = [LiveInterval(v, lo[v], hi[v]) for v in lo]
    out.sort(key=lambda i: (i.start, i.vreg.id))
    return out


def call_positions(f: MachFn) -> list:
    spans = number(f)
    out = []
    for b in f.layout():
        first, _ = spans[b.label]
        out.extend(first + k for k, ins in enumerate(b.body) if ins.op in CLOBBERING)
    return out


def crossing_calls(intervals: list, calls: list) -> set:
    """Registers live across a clobbering call; these must live in the frame."""
    out = set()
    for iv in intervals:
        k = bisect.bisect_right(calls, iv.start)
        if k < len(calls) and calls[k] < iv.end:
            out.add(iv.vreg)
    return out
