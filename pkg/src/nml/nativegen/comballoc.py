"""Allocation combining: one arena bump per straight-line run of allocations.

Within a block, an ``alloc`` absorbs every later ``alloc`` up to the next
call.  The absorbed results become ``lea`` offsets from the first pointer and
the combined instruction writes each block's header itself.
"""
from __future__ import annotations

from .mach import CLOBBERING, Addr, Instr, MachFn

WORD = 8


def combine_block(body: list) -> list:
    out = []
    head = None  # index in ``out`` of the alloc absorbing the current run
    for ins in body:
        if ins.op in CLOBBERING:
            head = None
            out.append(ins)
        elif ins.op == "alloc":
            if head is None:
                head = len(out)
                out.append(ins)
                continue
            first = out[head]
            parts = list(first.a)
            offset = sum((w + 1) * WORD for _, w, _ in parts)
            for off, w, tag in ins.a:
                parts.append((offset + off, w, tag))
            out[head] = Instr("alloc", first.d, (), tuple(parts))
            out.append(Instr("lea", ins.d, (first.d[0],), Addr(1, offset)))
        else:
            out.append(ins)
    return out


def combine_allocations(f: MachFn) -> MachFn:
    for b in f.blocks.values():
        b.body = combine_block(b.body)
    return f


def allocation_runs(f: MachFn) -> list:
    """Number of ``alloc`` instructions in each call-free straight-line run."""
    runs = []
    for b in f.layout():
        n = 0
        for ins in b.body:
            if ins.op in CLOBBERING:
                runs.append(n)
                n = 0
            elif ins.op == "alloc":
                n += 1
        runs.append(n)
    return runs
