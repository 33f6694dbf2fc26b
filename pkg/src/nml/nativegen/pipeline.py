"""The native middle-end as one call: Lambda -> linear code and data items."""
from __future__ import annotations

from dataclasses import dataclass, field

from .clambda import ClProgram, closure_convert
from .clambda import dump as dump_clambda
from .cmm import CmmProgram
from .cmm import dump as dump_cmm
from .cmmgen import generate_cmm
from .comballoc import combine_allocations
from .linearize import dump_linear, linearize
from .linscan import allocate_registers
from .liveness import compute_live_intervals
from .mach import dump_mach
from .selection import select_instructions


@dataclass(frozen=True)
class NativeOptions:
    allocator: str = "linear"  # "linear" | "spill_all"
    comballoc: bool = True


@dataclass
class NativeUnit:
    phrase: int
    clambda: ClProgram
    cmm: CmmProgram
    mach: list = field(default_factory=list)  # MachFn text before allocation
    linear: list = field(default_factory=list)

    @property
    def data(self) -> list:
        return self.cmm.data

    @property
    def entry(self) -> str:
        return self.cmm.entry

    def dump(self, stage: str) -> str:
        if stage == "clambda":
            return dump_clambda(self.clambda)
        if stage == "cmm":
            return dump_cmm(self.cmm)
        if stage == "mach":
            return "\n".join(self.mach)
        if stage == "linear":
            return "\n".join(dump_linear(f) for f in self.linear)
        raise ValueError(stage)


def schedule(f):
    """Instruction scheduling slot: the identity on out-of-order x86-64."""
    return f


def compile_native(lam, phrase: int, globals_: list, options: NativeOptions = NativeOptions(),
                   on_mach=None, approx: dict | None = None) -> NativeUnit:
    """``on_mach`` sees each MachFn after allocation combining, before register allocation.
    ``approx`` describes known functions held by earlier globals."""
    prefix = f"nml_phrase{phrase}"
    cl = closure_convert(lam, prefix, approx)
    cmm = generate_cmm(cl, phrase, globals_)
    unit = NativeUnit(phrase, cl, cmm)
    for fn in cmm.functions:
        m = select_instructions(fn)
        if options.comballoc:
            combine_allocations(m)
        m.validate()
        if on_mach is not None:
            on_mach(m)
        unit.mach.append(dump_mach(m))
        allocate_registers(m, compute_live_intervals(m), options.allocator)
        lin = schedule(linearize(m))
        lin.validate()
        unit.linear.append(lin)
    return unit
