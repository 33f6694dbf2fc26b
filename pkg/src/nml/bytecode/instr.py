"""Bytecode instruction set and program container.

An instruction is an ``(opcode, arg)`` pair.  The machine has an accumulator,
an operand stack holding arguments, locals and return frames, and the
current closure environment.  Binary operators take their first operand in
the accumulator and the second from the top of the stack.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.printer import show_float, show_string

OPCODES = [
    # hot path first: the interpreter tests opcodes roughly in this order
    "ACC", "PUSHACC", "PUSH", "CONST", "PUSHCONST", "ENVACC", "PUSHENVACC",
    "BRANCHIFNOT", "BRANCHIF", "BRANCH", "PUSH_RETADDR", "APPLY", "RETURN",
    # compare accu with the popped top and branch when the relation holds
    "BEQ", "BNE", "BLT", "BLE", "BGT", "BGE",
    "OFFSETINT", "ADDINT", "SUBINT", "MULINT", "LT", "LE", "GT", "GE", "EQ", "NE",
    "ARRAYGET", "ARRAYSET", "GETITEM", "SETITEM", "GETGLOBALITEM", "PUSHGETGLOBAL",
    "POP", "ASSIGN", "GETFIELD", "GETGLOBAL",
    "ADDFLOAT", "SUBFLOAT", "MULFLOAT", "DIVFLOAT", "DIVINT", "MODINT",
    "CLOSURE", "CLOSUREREC", "MAKEBLOCK", "MAKEARRAY", "SETGLOBAL", "NOT",
    "ARRAYLENGTH", "ARRAYMAKE", "STRINGLENGTH", "FLOATOFINT", "INTOFFLOAT",
    "PRINTINT", "PRINTFLOAT", "PRINTSTRING", "PRINTNEWLINE", "STOP",
]
OP = {name: i for i, name in enumerate(OPCODES)}
globals().update(OP)

# opcodes whose argument is a code label
BRANCH_OPS = ("BEQ", "BNE", "BLT", "BLE", "BGT", "BGE")
LABEL_OPS = {OP["BRANCH"], OP["BRANCHIF"], OP["BRANCHIFNOT"], OP["PUSH_RETADDR"]} | {
    OP[b] for b in BRANCH_OPS}
CLOSURE_OPS = {OP["CLOSURE"], OP["CLOSUREREC"]}


@dataclass
class BcProgram:
    """Code of one phrase.  Labels are absolute: the first instruction sits at
    ``base`` in the session's code space, so closures outlive their phrase."""
    code: list
    entry: int = 0
    constants: list = field(default_factory=list)
    base: int = 0

    def validate(self) -> None:
        lo, hi = self.base, self.base + len(self.code)
        assert lo <= self.entry < hi
        for op, arg in self.code:
            if op in LABEL_OPS:
                assert lo <= arg < hi, (OPCODES[op], arg)
            elif op in CLOSURE_OPS:
                assert lo <= arg[0] < hi
            elif op in (OP["ACC"], OP["PUSHACC"]):
                assert arg < 0  # stored as a negative list index
            elif op in (OP["ENVACC"], OP["PUSHENVACC"]):
                assert arg >= 0


def _arg_text(op: int, arg) -> str:
    if arg is None:
        return ""
    if op in (OP["ACC"], OP["PUSHACC"]):
        return str(-arg - 1)
    if op in CLOSURE_OPS:
        return f"L{arg[0]}, {arg[1]}"
    if op in LABEL_OPS:
        return f"L{arg}"
    if isinstance(arg, float):
        return show_float(arg)
    if op == OP["GETGLOBALITEM"]:
        return f"{arg[0]}.({arg[1]})"
    if isinstance(arg, str) and op in (OP["CONST"], OP["PUSHCONST"]):
        return show_string(arg)
    return str(arg)


def dump(prog: BcProgram) -> str:
    lines = []
    for i, (op, arg) in enumerate(prog.code, prog.base):
        mark = "*" if i == prog.entry else " "
        text = OPCODES[op] + (" " + _arg_text(op, arg) if arg is not None else "")
        lines.append(f"{mark}{i:5d}  {text}")
    return "\n".join(lines)
