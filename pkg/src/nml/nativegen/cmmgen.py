"""Clambda -> Cmm: tagged integers, boxed floats, explicit blocks and checks.

Integers are words ``2n+1``; false and unit are 1, true is 3.
Blocks carry a header word ``size << 10 | tag`` in front of their fields.
"""
from __future__ import annotations

import itertools

from ..errors import TRAP_BOUNDS, TRAP_DIVZERO
from ..lam import ir as L
from . import clambda as C
from .cmm import (CAlloc, CAssign, CCall, CCallInd, CConst,
                  CExtCall, CIf, CLet, CLoad, CLoop, CmmFunction, CmmProgram,
                  COp, CSeq, CStore, CSym, CTrap, CVar, FloatLit, GlobalSlot,
                  StringLit)

TAG_TUPLE, TAG_CLOSURE, TAG_STRING, TAG_FLOAT = 0, 247, 252, 253
UNIT_WORD = 1

_CMP = {"EQ": "e", "NE": "ne", "LT": "l", "LE": "le", "GT": "g", "GE": "ge"}
_FOPS = {"ADDFLOAT": "addf", "SUBFLOAT": "subf", "MULFLOAT": "mulf", "DIVFLOAT": "divf"}
_PRINT = {"PRINTINT": "print_int", "PRINTFLOAT": "print_float",
          "PRINTSTRING": "print_string", "PRINTNEWLINE": "print_newline"}


def wrap64(k: int) -> int:
    k &= (1 << 64) - 1
    return k - (1 << 64) if k >> 63 else k


def tag_const(n: int) -> int:
    return wrap64(2 * n + 1)


def add_const(x, k: int):
    k = wrap64(k)
    if k == 0:
        return x
    if type(x) is CConst:
        return CConst(wrap64(x.value + k))
    if type(x) is COp and x.op == "add" and type(x.args[1]) is CConst:
        return add_const(x.args[0], x.args[1].value + k)
    return COp("add", (x, CConst(k)))


def untag(x):
    if type(x) is CConst:
        return CConst(x.value >> 1)
    return COp("asr", (x, CConst(1)))


def tag(x):
    return add_const(COp("lsl", (x, CConst(1))), 1)


def add_int(a, b):
    if type(b) is CConst:
        return add_const(a, b.value - 1)
    if type(a) is CConst:
        return add_const(b, a.value - 1)
    return add_const(COp("add", (a, b)), -1)


def sub_int(a, b):
    if type(b) is CConst:
        return add_const(a, -(b.value - 1))
    return add_const(COp("sub", (a, b)), 1)


def mul_int(a, b):
    if type(b) is CConst:
        return add_const(COp("mul", (add_const(a, -1), CConst(b.value >> 1))), 1)
    if type(a) is CConst:
        return add_const(COp("mul", (add_const(b, -1), CConst(a.value >> 1))), 1)
    return add_const(COp("mul", (add_const(a, -1), untag(b))), 1)


def box(f):
    return CAlloc(TAG_FLOAT, (f,))


def unbox(e):
    if type(e) is CAlloc and e.tag == TAG_FLOAT:
        return e.fields[0]
    return CLoad(e, "float64")


def tagged_length(a):
    hdr = CLoad(add_const(a, -8))
    return COp("or", (COp("lsr", (hdr, CConst(9))), CConst(1)))


def element_address(a, i):
    if type(i) is CConst:
        return add_const(a, 4 * i.value - 4)
    return add_const(COp("add", (a, COp("lsl", (i, CConst(2))))), -4)


def rt(name: str) -> str:
    return f"nml_rt_{name}"


class CmmGen:
    def __init__(self, prefix: str):
        self.prefix = prefix
        self.data: list = []
        self.floats: dict = {}
        self.strings: dict = {}
        self.ids = itertools.count(2_000_000)

    def fresh(self) -> int:
        return next(self.ids)

    # -- literals --
    def float_label(self, v: float) -> str:
        key = repr(v) if v == v else "nan"
        if key not in self.floats:
            label = f"{self.prefix}.float.{len(self.floats)}"
            self.floats[key] = label
            self.data.append(FloatLit(label, v))
        return self.floats[key]

    def string_label(self, s: str) -> str:
        if s not in self.strings:
            label = f"{self.prefix}.str.{len(self.strings)}"
            self.strings[s] = label
            self.data.append(StringLit(label, s))
        return self.strings[s]

    # -- expressions --
    def expr(self, e):
        t = type(e)
        if t is L.ConstInt:
            return CConst(tag_const(e.value))
        if t is L.ConstFloat:
            return box(CLoad(CSym(self.float_label(e.value)), "float64"))
        if t is L.ConstString:
            return CSym(self.string_label(e.value))
        if t is L.Var:
            return CVar(e.id)
        if t is L.GlobalVar:
            return CLoad(CSym(e.symbol))
        if t is C.EnvField:
            return CLoad(add_const(CVar(e.env), 8 * e.index))
        if t is C.MakeClosure:
            code = C.entry_label(e.label, e.arity)
            return CAlloc(TAG_CLOSURE, (CSym(code),) + tuple(self.expr(c) for c in e.captured))
        if t is C.DirectCall:
            return CCall(e.label, tuple(self.expr(a) for a in e.args), self.expr(e.env))
        if t is C.IndirectCall:
            out = self.expr(e.fn)
            for a in e.args:
                out = CCallInd(out, self.expr(a))
            return out
        if t is L.Let:
            return CLet(e.id, self.expr(e.bound), self.expr(e.body))
        if t is L.Prim:
            return self.prim(e)
        if t is L.If:
            return CIf(self.expr(e.cond), self.expr(e.then), self.expr(e.orelse))
        if t is L.While:
            return CSeq(CLoop(self.expr(e.cond), self.expr(e.body), True), CConst(UNIT_WORD))
        if t is L.For:
            return self.for_loop(e)
        if t is L.Seq:
            return CSeq(self.expr(e.first), self.expr(e.second))
        raise TypeError(e)

    def for_loop(self, e: L.For):
        hi, stop, i = self.fresh(), self.fresh(), e.id
        step = CAssign(i, add_const(CVar(i), 2))
        loop = CLoop(COp("cmp", (CVar(i), CVar(stop)), "ne"), CSeq(self.expr(e.body), step), False)
        body = CIf(COp("cmp", (CVar(i), CVar(hi)), "le"),
                   CLet(stop, add_const(CVar(hi), 2), CSeq(loop, CConst(UNIT_WORD))),
                   CConst(UNIT_WORD))
        return CLet(hi, self.expr(e.hi), CLet(i, self.expr(e.lo), body))

    def prim(self, e: L.Prim):
        op = e.op
        args = [self.expr(a) for a in e.args]
        if op == "ADDINT":
            return add_int(*args)
        if op == "SUBINT":
            return sub_int(*args)
        if op == "MULINT":
            return mul_int(*args)
        if op in ("DIVINT", "MODINT"):
            return self.divmod("div" if op == "DIVINT" else "mod", *args)
        if op in _CMP:
            return COp("cmp", tuple(args), _CMP[op])
        if op == "NOT":
            return COp("xor", (args[0], CConst(2)))
        if op in _FOPS:
            return box(COp(_FOPS[op], (unbox(args[0]), unbox(args[1]))))
        if op == "FLOATOFINT":
            return box(COp("floatofint", (untag(args[0]),)))
        if op == "INTOFFLOAT":
            return tag(COp("intoffloat", (unbox(args[0]),)))
        if op in ("MAKEBLOCK", "MAKEARRAY"):
            return CAlloc(TAG_TUPLE, tuple(args))
        if op == "FIELD":
            return CLoad(add_const(args[0], 8 * e.param))
        if op == "ARRAYLENGTH":
            return tagged_length(args[0])
        if op == "STRINGLENGTH":
            return tag(CLoad(args[0]))
        if op == "ARRAYGET":
            return self.array_access(args[0], args[1], None)
        if op == "ARRAYSET":
            return self.array_access(args[0], args[1], args[2])
        if op == "ARRAYMAKE":
            return CExtCall(rt("array_make"), tuple(args))
        if op in _PRINT:
            return CExtCall(rt(_PRINT[op]), tuple(args))
        if op == "SETGLOBAL":
            return CStore(CSym(e.param), "word64", args[0])
        raise ValueError(f"no Cmm lowering for {op}")

    def divmod(self, op: str, a, b):
        if type(b) is CConst and b.value != UNIT_WORD:
            vb = None
        else:
            vb = self.fresh()
        va = self.fresh()
        divisor = untag(b) if vb is None else untag(CVar(vb))
        res = tag(COp(op, (untag(CVar(va)), divisor)))
        if vb is None:
            return CLet(va, a, res)
        check = CIf(COp("cmp", (CVar(vb), CConst(UNIT_WORD)), "e"), CTrap(TRAP_DIVZERO), CConst(UNIT_WORD))
        return CLet(vb, b, CLet(va, a, CSeq(check, res)))

    def array_access(self, a, i, v):
        vi, va = self.fresh(), self.fresh()
        check = CIf(COp("cmp", (CVar(vi), tagged_length(CVar(va))), "ae"),
                    CTrap(TRAP_BOUNDS), CConst(UNIT_WORD))
        addr = element_address(CVar(va), CVar(vi))
        if v is None:
            body = CSeq(check, CLoad(addr))
        else:
            body = CSeq(check, CStore(addr, "word64", CVar(vv := self.fresh())))
        out = CLet(vi, i, CLet(va, a, body))
        if v is not None:
            out = CLet(vv, v, out)
        return out

    # -- functions --
    def function(self, f: C.CFunction) -> list:
        fns = [CmmFunction(f.label, f.params, f.env, self.expr(f.body))]
        n = f.arity
        if n > 1:
            for k in range(1, n):
                x, env = self.fresh(), self.fresh()
                body = CAlloc(TAG_CLOSURE, (CSym(f"{f.label}.c{k + 1}"), CVar(x), CVar(env)))
                fns.append(CmmFunction(f"{f.label}.c{k}", (x,), env, body))
            fns.append(self.last_stub(f))
        return fns

    def last_stub(self, f: C.CFunction) -> CmmFunction:
        """Stub taking the last argument: walk the partial chain, call directly."""
        n = f.arity
        x, env = self.fresh(), self.fresh()
        # env is P_{n-1} = [code, x_{n-1}, P_{n-2}], ..., P_0 is the closure itself
        chain = [self.fresh() for _ in range(n)]  # chain[k] holds P_k
        args = [CLoad(add_const(CVar(chain[k]), 8)) for k in range(1, n)] + [CVar(x)]
        body = CCall(f.label, tuple(args), CVar(chain[0]))
        for k in range(1, n):
            body = CLet(chain[k - 1], CLoad(add_const(CVar(chain[k]), 16)), body)
        body = CLet(chain[n - 1], CVar(env), body)
        return CmmFunction(f"{f.label}.c{n}", (x,), env, body)

    def program(self, p: C.ClProgram, entry: str, globals_: list) -> CmmProgram:
        fns = []
        for f in p.functions:
            fns.extend(self.function(f))
        fns.append(CmmFunction(entry, (), None, self.expr(p.body), global_=True))
        self.data.extend(GlobalSlot(g) for g in globals_)
        return CmmProgram(fns, self.data, entry)


def generate_cmm(p: C.ClProgram, phrase: int = 0, globals_: list | None = None) -> CmmProgram:
    prefix = f"nml_phrase{phrase}"
    gen = CmmGen(prefix)
    return gen.program(p, f"{prefix}_entry", globals_ or [])
