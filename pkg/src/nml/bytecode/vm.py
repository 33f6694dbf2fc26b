"""Stack-machine interpreter for bytecode programs.

Values are host objects: ints (also booleans and unit), floats, strs,
tuples (tuple blocks), lists (arrays) and closures ``[code index, env]``.
"""
from __future__ import annotations

import math

from ..errors import TRAP_BOUNDS, TRAP_DIVZERO, TRAP_INVALID, TRAP_STACK, Trap
from ..frontend.printer import show_float
from ..lam.simplify import int_div, int_mod
from .instr import OP, BcProgram

_H = 1 << 62
_M = (1 << 63) - 1

DEFAULT_MAX_STACK = 4_000_000


def _wrap(n: int) -> int:
    n &= _M
    return n - (1 << 63) if n >= _H else n


def int_of_float(x: float) -> int:
    """Truncation with the machine ``cvttsd2si`` result on overflow or NaN."""
    if math.isnan(x) or math.isinf(x) or not (-(2 ** 63) <= x < 2 ** 63):
        return 0  # 0x8000000000000000 retagged
    return _wrap(int(x))


class CodeSpace:
    """Session-wide instruction vector; phrases are appended in order."""

    def __init__(self):
        self.code: list = []

    @property
    def next_base(self) -> int:
        return len(self.code)

    def load(self, prog: BcProgram) -> None:
        if prog.base != len(self.code):
            raise ValueError(f"program compiled for base {prog.base}, space ends at {len(self.code)}")
        self.code.extend(prog.code)


def run_bytecode(prog: BcProgram, globals_: dict, write=None,
                 max_stack: int = DEFAULT_MAX_STACK, check_balance: bool = False,
                 space: CodeSpace | None = None):
    """Run ``prog`` to its STOP and return the accumulator.

    ``write`` receives printed text.  Traps raise :class:`~nml.errors.Trap`.
    With ``check_balance`` the operand stack must be empty at STOP.  Closures
    from earlier phrases need the shared ``space`` they were loaded into.
    """
    if write is None:
        write = print_to_stdout
    if space is None:
        space = CodeSpace()
        space.code.extend([None] * prog.base)
    if prog.base + len(prog.code) > len(space.code):
        space.load(prog)
    code = space.code
    pc = prog.entry
    stack: list = []
    push = stack.append
    pop = stack.pop
    accu = 0
    env: list = []

    ACC, PUSHACC, PUSH, CONST, PUSHCONST = OP["ACC"], OP["PUSHACC"], OP["PUSH"], OP["CONST"], OP["PUSHCONST"]
    ENVACC = OP["ENVACC"]
    BRANCHIFNOT, BRANCHIF, BRANCH = OP["BRANCHIFNOT"], OP["BRANCHIF"], OP["BRANCH"]
    PUSH_RETADDR, APPLY = OP["PUSH_RETADDR"], OP["APPLY"]
    BEQ, BNE, BLT, BLE, BGT = OP["BEQ"], OP["BNE"], OP["BLT"], OP["BLE"], OP["BGT"]
    OFFSETINT, ADDINT, SUBINT, MULINT = OP["OFFSETINT"], OP["ADDINT"], OP["SUBINT"], OP["MULINT"]
    LT, LE, GT, GE, EQ = OP["LT"], OP["LE"], OP["GT"], OP["GE"], OP["EQ"]
    ARRAYGET, ARRAYSET, GETITEM, SETITEM = OP["ARRAYGET"], OP["ARRAYSET"], OP["GETITEM"], OP["SETITEM"]
    GETGLOBALITEM, PUSHGETGLOBAL = OP["GETGLOBALITEM"], OP["PUSHGETGLOBAL"]
    POP, ASSIGN, GETFIELD, GETGLOBAL = OP["POP"], OP["ASSIGN"], OP["GETFIELD"], OP["GETGLOBAL"]
    # the dispatch below tests opcode ranges; keep it in step with OPCODES
    G_BRANCH, G_CMPBR, G_INT, G_MEM = OP["BRANCHIFNOT"], OP["BEQ"], OP["OFFSETINT"], OP["ARRAYGET"]
    G_SLOW = OP["GETGLOBAL"] + 1
    H = _H
    N = -_H

    while True:
        op, arg = code[pc]
        pc += 1
        if op < G_BRANCH:
            if op == ACC:
                accu = stack[arg]
            elif op == PUSHACC:
                push(accu)
                accu = stack[arg]
            elif op == PUSH:
                push(accu)
            elif op == CONST:
                accu = arg
            elif op == PUSHCONST:
                push(accu)
                accu = arg
            elif op == ENVACC:
                accu = env[arg]
            else:
                push(accu)
                accu = env[arg]
        elif op < G_CMPBR:
            if op == BRANCHIFNOT:
                if not accu:
                    pc = arg
            elif op == BRANCHIF:
                if accu:
                    pc = arg
            elif op == BRANCH:
                pc = arg
            elif op == PUSH_RETADDR:
                push(arg)
                push(env)
            elif op == APPLY:
                pc = accu[0]
                env = accu[1]
                if len(stack) > max_stack:
                    raise Trap(TRAP_STACK)
            else:  # RETURN
                del stack[-arg:]
                env = pop()
                pc = pop()
        elif op < G_INT:
            b = pop()
            if op == BLT:
                if accu < b:
                    pc = arg
            elif op == BGT:
                if accu > b:
                    pc = arg
            elif op == BLE:
                if accu <= b:
                    pc = arg
            elif op == BNE:
                if accu != b:
                    pc = arg
            elif op == BEQ:
                if accu == b:
                    pc = arg
            elif accu >= b:
                pc = arg
        elif op < G_MEM:
            if op == OFFSETINT:
                accu += arg
                if not N <= accu < H:
                    accu = _wrap(accu)
            elif op == ADDINT:
                accu += pop()
                if not N <= accu < H:
                    accu = _wrap(accu)
            elif op == SUBINT:
                accu -= pop()
                if not N <= accu < H:
                    accu = _wrap(accu)
            elif op == MULINT:
                accu *= pop()
                if not N <= accu < H:
                    accu = _wrap(accu)
            elif op == LT:
                accu = accu < pop()
            elif op == LE:
                accu = accu <= pop()
            elif op == GT:
                accu = accu > pop()
            elif op == GE:
                accu = accu >= pop()
            elif op == EQ:
                accu = accu == pop()
            else:
                accu = accu != pop()
        elif op < G_SLOW:
            if op == GETGLOBALITEM:
                a = globals_[arg[0]]
                i = arg[1]
                if not 0 <= i < len(a):
                    raise Trap(TRAP_BOUNDS)
                accu = a[i]
            elif op == ARRAYGET:
                i = pop()
                if not 0 <= i < len(accu):
                    raise Trap(TRAP_BOUNDS)
                accu = accu[i]
            elif op == SETITEM:
                v = pop()
                if not 0 <= arg < len(accu):
                    raise Trap(TRAP_BOUNDS)
                accu[arg] = v
                accu = 0
            elif op == GETITEM:
                if not 0 <= arg < len(accu):
                    raise Trap(TRAP_BOUNDS)
                accu = accu[arg]
            elif op == ARRAYSET:
                i = pop()
                v = pop()
                if not 0 <= i < len(accu):
                    raise Trap(TRAP_BOUNDS)
                accu[i] = v
                accu = 0
            elif op == PUSHGETGLOBAL:
                push(accu)
                accu = globals_[arg]
            elif op == POP:
                del stack[-arg:]
            elif op == ASSIGN:
                stack[arg] = accu
            elif op == GETFIELD:
                accu = accu[arg]
            else:
                accu = globals_[arg]
        else:
            accu, pc, env = _slow(op, arg, accu, pc, env, stack, globals_, write)
            if pc < 0:
                if check_balance and stack:
                    raise AssertionError(f"operand stack not balanced at STOP: {len(stack)} left")
                return accu


def _slow(op, arg, accu, pc, env, stack, globals_, write):
    """Less frequent instructions.  Returns (accu, pc, env); pc < 0 means STOP."""
    name = _NAMES[op]
    pop = stack.pop
    if name == "ADDFLOAT":
        return accu + pop(), pc, env
    if name == "SUBFLOAT":
        return accu - pop(), pc, env
    if name == "MULFLOAT":
        return accu * pop(), pc, env
    if name == "DIVFLOAT":
        b = pop()
        if b == 0.0:
            if accu == 0.0 or math.isnan(accu):
                return math.nan, pc, env
            return math.copysign(math.inf, accu) * math.copysign(1.0, b), pc, env
        return accu / b, pc, env
    if name in ("DIVINT", "MODINT"):
        b = pop()
        if b == 0:
            raise Trap(TRAP_DIVZERO)
        r = int_div(accu, b) if name == "DIVINT" else int_mod(accu, b)
        return _wrap(r), pc, env
    if name == "CLOSURE" or name == "CLOSUREREC":
        label, n = arg
        if n:
            captured = stack[-n:]
            del stack[-n:]
        else:
            captured = []
        clo = [label, captured]
        if name == "CLOSUREREC":
            captured.append(clo)
        return clo, pc, env
    if name == "MAKEBLOCK":
        fields = [accu]
        for _ in range(arg - 1):
            fields.append(pop())
        return tuple(fields), pc, env
    if name == "MAKEARRAY":
        fields = [accu]
        for _ in range(arg - 1):
            fields.append(pop())
        return fields, pc, env
    if name == "SETGLOBAL":
        globals_[arg] = accu
        return 0, pc, env
    if name == "NOT":
        return not accu, pc, env
    if name == "ARRAYLENGTH":
        return len(accu), pc, env
    if name == "ARRAYMAKE":
        v = pop()
        if accu < 0:
            raise Trap(TRAP_INVALID)
        return [v] * accu, pc, env
    if name == "STRINGLENGTH":
        return len(accu.encode("utf-8")), pc, env
    if name == "FLOATOFINT":
        return float(accu), pc, env
    if name == "INTOFFLOAT":
        return int_of_float(accu), pc, env
    if name == "PRINTINT":
        write(str(accu))
        return 0, pc, env
    if name == "PRINTFLOAT":
        write(show_float(accu))
        return 0, pc, env
    if name == "PRINTSTRING":
        write(accu)
        return 0, pc, env
    if name == "PRINTNEWLINE":
        write("\n")
        return 0, pc, env
    if name == "STOP":
        return accu, -1, env
    raise ValueError(f"bad opcode {op}")


def print_to_stdout(s: str) -> None:
    print(s, end="", flush=True)


_NAMES = {v: k for k, v in OP.items()}
