"""Instruction selection: Cmm trees -> Mach CFG over virtual registers.

A tree walk, operands right to left.  Additions with constants and scaled
indices become ``lea`` or fold into load/store addressing modes; comparisons
feeding a conditional become compare-and-branch terminators.
"""
from __future__ import annotations

from ..jit.x86 import fits32
from .cmm import (FLOAT, CAlloc, CAssign, CCall, CCallInd, CConst, CExtCall,
                  CIf, CLet, CLoad, CLoop, CmmFunction, COp, CSeq, CStore,
                  CSym, CTrap, CVar, ctype)
from .mach import FLT, INT, Addr, Block, Instr, MachFn, VReg

SWAP = {"e": "e", "ne": "ne", "l": "g", "g": "l", "le": "ge", "ge": "le",
        "b": "a", "a": "b", "be": "ae", "ae": "be"}
_FOP = {"addf": "addsd", "subf": "subsd", "mulf": "mulsd", "divf": "divsd"}
_SHIFT = {"lsl": "shl", "lsr": "shr", "asr": "sar"}
_SAME = object()


def _const32(e) -> bool:
    return type(e) is CConst and fits32(e.value)


def split_address(e):
    """``e`` as ``(base, index, scale, disp)``; ``index`` may be ``_SAME`` for base+base."""
    disp = 0
    while (type(e) is COp and e.op == "add" and type(e.args[1]) is CConst
           and fits32(disp + e.args[1].value)):
        disp += e.args[1].value
        e = e.args[0]
    if type(e) is COp and e.op == "add":
        x, y = e.args
        if type(y) is COp and y.op == "lsl" and type(y.args[1]) is CConst and 1 <= y.args[1].value <= 3:
            return x, y.args[0], 1 << y.args[1].value, disp
        return x, y, 1, disp
    if type(e) is COp and e.op == "lsl" and e.args[1] == CConst(1):
        return e.args[0], _SAME, 1, disp
    return e, None, 1, disp


class Selector:
    def __init__(self, fn: CmmFunction):
        self.fn = fn
        self.nv = 0
        self.nb = 0
        self.blocks: dict = {}
        self.order: list = []
        self.cur: Block | None = None
        self.env: dict = {}
        self.vars: set = set()  # vregs holding Cmm variables (never reused as temps)

    # -- plumbing --
    def new(self, cls: str = INT) -> VReg:
        self.nv += 1
        return VReg(self.nv, cls)

    def label(self) -> int:
        self.nb += 1
        self.blocks[self.nb] = Block(self.nb)
        return self.nb

    def start(self, label: int):
        self.cur = self.blocks[label]
        self.order.append(label)

    def emit(self, op, d=(), s=(), a=None) -> None:
        if self.cur is None:  # code after a trap: unreachable, pruned later
            self.start(self.label())
        self.cur.body.append(Instr(op, d, s, a))

    def terminate(self, op, s=(), a=None) -> None:
        if self.cur is None:
            self.start(self.label())
        self.cur.term = Instr(op, (), s, a)
        self.cur = None

    # -- values --
    def value(self, e) -> VReg:
        r = self.expr(e)
        if r is None:
            r = self.new()
            self.emit("const", (r,), (), 1)
        return r

    def fresh_value(self, e) -> VReg:
        """Like :meth:`value` but never returns a register bound to a variable."""
        r = self.value(e)
        if r in self.vars:
            c = self.new(r.cls)
            self.emit("move", (c,), (r,))
            r = c
        return r

    def address(self, e):
        base, index, scale, disp = split_address(e)
        if index is _SAME:
            b = self.value(base)
            return (b, b), scale, disp
        if index is None:
            return (self.value(base),), scale, disp
        i = self.value(index)
        return (self.value(base), i), scale, disp

    def expr(self, e):
        t = type(e)
        if t is CConst:
            r = self.new()
            self.emit("const", (r,), (), e.value)
            return r
        if t is CSym:
            r = self.new()
            self.emit("sym", (r,), (), e.name)
            return r
        if t is CVar:
            return self.env[e.id]
        if t is CLet:
            r = self.fresh_value(e.bound)
            self.env[e.id] = r
            self.vars.add(r)
            return self.expr(e.body)
        if t is CAssign:
            v = self.value(e.value)
            self.emit("move", (self.env[e.id],), (v,))
            return None
        if t is CLoad:
            regs, scale, disp = self.address(e.addr)
            r = self.new(FLT if e.chunk == "float64" else INT)
            self.emit("load", (r,), regs, Addr(scale, disp, e.chunk))
            return r
        if t is CStore:
            v = self.value(e.value)
            regs, scale, disp = self.address(e.addr)
            self.emit("store", (), (v,) + regs, Addr(scale, disp, e.chunk))
            return None
        if t is COp:
            return self.op(e)
        if t is CAlloc:
            vals = [self.value(f) for f in reversed(e.fields)][::-1]
            r = self.new()
            self.emit("alloc", (r,), (), ((0, len(vals), e.tag),))
            for k, v in enumerate(vals):
                chunk = "float64" if v.cls == FLT else "word64"
                self.emit("store", (), (v, r), Addr(1, 8 * k, chunk))
            return r
        if t is CCall:
            env = ()
            args = [self.value(a) for a in reversed(e.args)][::-1]
            if e.env is not None:
                env = (self.value(e.env),)
            r = self.new()
            self.emit("call", (r,), tuple(args) + env, (e.symbol, e.env is not None))
            return r
        if t is CCallInd:
            arg = self.value(e.arg)
            clo = self.value(e.closure)
            r = self.new()
            self.emit("callind", (r,), (clo, arg))
            return r
        if t is CExtCall:
            args = [self.value(a) for a in reversed(e.args)][::-1]
            r = self.new()
            self.emit("extcall", (r,), tuple(args), e.symbol)
            return r
        if t is CIf:
            return self.if_(e)
        if t is CLoop:
            return self.loop(e)
        if t is CSeq:
            self.expr(e.first)
            return self.expr(e.second)
        if t is CTrap:
            self.terminate("trap", (), e.kind)
            return None
        raise TypeError(e)

    def op(self, e: COp):
        op, args = e.op, e.args
        if op == "add":
            regs, scale, disp = self.address(e)
            r = self.new()
            if len(regs) == 1 and disp == 0:
                self.emit("move", (r,), regs)
            else:
                self.emit("lea", (r,), regs, Addr(scale, disp))
            return r
        if op in ("sub", "mul", "and", "or", "xor"):
            iop = op
            if _const32(args[1]):
                a = self.value(args[0])
                r = self.new()
                self.emit("iop", (r,), (a,), (iop, args[1].value))
                return r
            if op != "sub" and _const32(args[0]):
                b = self.value(args[1])
                r = self.new()
                self.emit("iop", (r,), (b,), (iop, args[0].value))
                return r
            b = self.value(args[1])
            a = self.value(args[0])
            r = self.new()
            self.emit("iop", (r,), (a, b), (iop, None))
            return r
        if op in _SHIFT:
            if type(args[1]) is not CConst:
                raise ValueError("shift by a variable amount")
            a = self.value(args[0])
            r = self.new()
            self.emit("shift", (r,), (a,), (_SHIFT[op], args[1].value & 63))
            return r
        if op in ("div", "mod"):
            b = self.value(args[1])
            a = self.value(args[0])
            r = self.new()
            self.emit("divmod", (r,), (a, b), op)
            return r
        if op == "cmp":
            srcs, cond, imm = self.compare(args, e.param)
            r = self.new()
            self.emit("cmpset", (r,), srcs, (cond, imm))
            return r
        if op in _FOP:
            b = self.value(args[1])
            a = self.value(args[0])
            r = self.new(FLT)
            self.emit("fop", (r,), (a, b), _FOP[op])
            return r
        if op == "floatofint":
            a = self.value(args[0])
            r = self.new(FLT)
            self.emit("itof", (r,), (a,))
            return r
        if op == "intoffloat":
            a = self.value(args[0])
            r = self.new()
            self.emit("ftoi", (r,), (a,))
            return r
        raise ValueError(f"unknown Cmm operator {op}")

    def compare(self, args, cond):
        a, b = args
        if _const32(b):
            return (self.value(a),), cond, b.value
        if _const32(a):
            return (self.value(b),), SWAP[cond], a.value
        vb = self.value(b)
        va = self.value(a)
        return (va, vb), cond, None

    # -- control --
    def branch(self, c, if_true: int, if_false: int) -> None:
        t = type(c)
        if t is COp and c.op == "cmp":
            srcs, cond, imm = self.compare(c.args, c.param)
            self.terminate("cbr", srcs, (cond, imm, if_true, if_false))
        elif t is COp and c.op == "xor" and c.args[1] == CConst(2):
            self.branch(c.args[0], if_false, if_true)
        elif t is CConst:
            self.terminate("jmp", (), if_true if c.value != 1 else if_false)
        elif t is CIf:
            lt, lf = self.label(), self.label()
            self.branch(c.cond, lt, lf)
            self.start(lt)
            self.branch(c.then, if_true, if_false)
            self.start(lf)
            self.branch(c.orelse, if_true, if_false)
        else:
            v = self.value(c)
            self.terminate("cbr", (v,), ("ne", 1, if_true, if_false))

    def if_(self, e: CIf):
        lt, lf, join = self.label(), self.label(), self.label()
        self.branch(e.cond, lt, lf)
        cls = FLT if FLOAT in (ctype(e.then), ctype(e.orelse)) else INT
        r = self.new(cls)
        used = False
        for label, arm in ((lt, e.then), (lf, e.orelse)):
            self.start(label)
            v = self.expr(arm)
            if self.cur is not None:
                if v is None and cls == INT:
                    self.emit("const", (r,), (), 1)
                elif v is not None:
                    self.emit("move", (r,), (v,))
                used = True
                self.terminate("jmp", (), join)
        self.start(join)
        return r if used else None

    def loop(self, e: CLoop):
        body, test, exit_ = self.label(), self.label(), self.label()
        self.terminate("jmp", (), test if e.test_first else body)
        self.start(body)
        self.expr(e.body)
        if self.cur is not None:
            self.terminate("jmp", (), test)
        self.start(test)
        self.branch(e.cond, body, exit_)
        self.start(exit_)
        return None

    def run(self) -> MachFn:
        fn = self.fn
        self.start(self.label())
        params = [self.new() for _ in fn.params]
        for pid, v in zip(fn.params, params):
            self.env[pid] = v
            self.vars.add(v)
        if fn.env is not None:
            env = self.new()
            self.env[fn.env] = env
            self.vars.add(env)
            params.append(env)
        self.emit("getargs", tuple(params), (), fn.env is not None)
        r = self.expr(fn.body)
        if self.cur is not None:
            if r is None:
                r = self.new()
                self.emit("const", (r,), (), 1)
            self.terminate("ret", (r,))
        out = MachFn(fn.name, self.blocks, self.order, fn.global_)
        prune_unreachable(out)
        return out


def prune_unreachable(f: MachFn) -> None:
    seen = set()
    stack = [f.order[0]]
    while stack:
        b = stack.pop()
        if b in seen:
            continue
        seen.add(b)
        stack.extend(f.successors(b))
    f.order = [b for b in f.order if b in seen]
    f.blocks = {b: f.blocks[b] for b in f.order}


def select_instructions(fn: CmmFunction) -> MachFn:
    return Selector(fn).run()
