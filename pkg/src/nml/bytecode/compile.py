"""Lambda -> bytecode.

Operands are evaluated right to left: the last argument is computed and
pushed first, the first argument ends up in the accumulator.  Functions are
unary; ``Apply(f, [a1..an])`` becomes n successive applications.
"""
from __future__ import annotations

from ..lam import ir as L
from .instr import OP, BcProgram

_DIRECT = {
    "ADDINT", "SUBINT", "MULINT", "DIVINT", "MODINT", "EQ", "NE", "LT", "LE",
    "GT", "GE", "ADDFLOAT", "SUBFLOAT", "MULFLOAT", "DIVFLOAT", "NOT",
    "ARRAYGET", "ARRAYSET", "ARRAYLENGTH", "ARRAYMAKE", "STRINGLENGTH",
    "FLOATOFINT", "INTOFFLOAT", "PRINTINT", "PRINTFLOAT", "PRINTSTRING",
    "PRINTNEWLINE",
}


_PUSH = OP["PUSH"]
_FUSE = {"ACC": "PUSHACC", "CONST": "PUSHCONST", "ENVACC": "PUSHENVACC",
         "GETGLOBAL": "PUSHGETGLOBAL"}
# comparison -> branch taken when it is false
_BRANCH_UNLESS = {"EQ": "BNE", "NE": "BEQ", "LT": "BGE", "LE": "BGT", "GT": "BLE", "GE": "BLT"}


class _Label:
    __slots__ = ("pos",)

    def __init__(self):
        self.pos = None


class _Fn:
    """Compilation context of one function body."""

    def __init__(self, env_index: dict):
        self.env_index = env_index  # var id -> env slot
        self.slots: dict = {}  # var id -> absolute stack slot
        self.sz = 0


class BytecodeCompiler:
    def __init__(self, base: int = 0):
        self.base = base
        self.code: list = []
        self.pending: list = []  # (label, Fun, env ids, self id)
        self.constants: list = []
        self.label_at = -1

    def emit(self, op: str, arg=None):
        # fuse PUSH with a following load unless a label sits between them
        if (op in _FUSE and self.code and self.code[-1][0] == _PUSH
                and self.label_at != len(self.code)):
            self.code[-1] = [OP[_FUSE[op]], arg]
            return
        self.code.append([OP[op], arg])

    def place(self, label: _Label):
        label.pos = len(self.code)
        self.label_at = len(self.code)

    # -- variable access --
    def access(self, ctx: _Fn, vid: int):
        if vid in ctx.slots:
            self.emit("ACC", -(ctx.sz - ctx.slots[vid]))
        else:
            self.emit("ENVACC", ctx.env_index[vid])

    def push(self, ctx: _Fn):
        self.emit("PUSH")
        ctx.sz += 1

    def bind(self, ctx: _Fn, vid: int):
        ctx.slots[vid] = ctx.sz - 1

    def pop(self, ctx: _Fn, n: int):
        if n:
            self.emit("POP", n)
            ctx.sz -= n

    def ret(self, ctx: _Fn):
        self.emit("RETURN", ctx.sz)

    # -- expressions --
    def expr(self, e, ctx: _Fn, tail: bool = False):
        t = type(e)
        if t is L.Var:
            self.access(ctx, e.id)
        elif t is L.GlobalVar:
            self.emit("GETGLOBAL", e.symbol)
        elif t in (L.ConstInt, L.ConstFloat, L.ConstString):
            if t is not L.ConstInt:
                self.constants.append(e.value)
            self.emit("CONST", e.value)
        elif t is L.Fun:
            self.closure(e, ctx, None)
        elif t is L.Apply:
            self.apply(e, ctx)
        elif t is L.Let:
            self.expr(e.bound, ctx)
            self.push(ctx)
            self.bind(ctx, e.id)
            self.expr(e.body, ctx, tail)
            if tail:
                ctx.sz -= 1  # RETURN already dropped the slot
                return
            self.pop(ctx, 1)
        elif t is L.LetRec:
            (vid, fn), = e.bindings
            self.closure(fn, ctx, vid)
            self.push(ctx)
            self.bind(ctx, vid)
            self.expr(e.body, ctx, tail)
            if tail:
                ctx.sz -= 1  # RETURN already dropped the slot
                return
            self.pop(ctx, 1)
        elif t is L.Prim:
            self.prim(e, ctx)
        elif t is L.If:
            orelse, end = _Label(), _Label()
            self.branch_unless(e.cond, orelse, ctx)
            self.expr(e.then, ctx, tail)
            if not tail:
                self.emit("BRANCH", end)
            self.place(orelse)
            self.expr(e.orelse, ctx, tail)
            self.place(end)
            if tail:
                return
        elif t is L.Seq:
            self.expr(e.first, ctx)
            self.expr(e.second, ctx, tail)
            if tail:
                return
        elif t is L.While:
            test, end = _Label(), _Label()
            self.place(test)
            self.branch_unless(e.cond, end, ctx)
            self.expr(e.body, ctx)
            self.emit("BRANCH", test)
            self.place(end)
            self.emit("CONST", 0)
        elif t is L.For:
            self.for_loop(e, ctx)
        else:
            raise TypeError(e)
        if tail:
            self.ret(ctx)

    def branch_unless(self, cond, label: _Label, ctx: _Fn):
        """Jump to ``label`` when ``cond`` is false, fusing integer comparisons."""
        if type(cond) is L.Prim and cond.op in _BRANCH_UNLESS:
            self.args_right_to_left(cond.args, ctx)
            self.emit(_BRANCH_UNLESS[cond.op], label)
            ctx.sz -= 1
        else:
            self.expr(cond, ctx)
            self.emit("BRANCHIFNOT", label)

    def acc_slot(self, ctx: _Fn, slot: int):
        self.emit("ACC", -(ctx.sz - slot))

    def for_loop(self, e: L.For, ctx: _Fn):
        loop, end = _Label(), _Label()
        self.expr(e.hi, ctx)
        self.push(ctx)
        hi_slot = ctx.sz - 1
        self.expr(e.lo, ctx)
        self.push(ctx)
        self.bind(ctx, e.id)
        i_slot = ctx.sz - 1
        # exit at once when i > hi
        self.acc_slot(ctx, hi_slot)
        self.push(ctx)
        self.acc_slot(ctx, i_slot)
        self.emit("BGT", end)
        ctx.sz -= 1
        self.place(loop)
        self.expr(e.body, ctx)
        # stop after the iteration with i = hi, so i never steps past max_int
        self.acc_slot(ctx, hi_slot)
        self.push(ctx)
        self.acc_slot(ctx, i_slot)
        self.emit("BEQ", end)
        ctx.sz -= 1
        self.acc_slot(ctx, i_slot)
        self.emit("OFFSETINT", 1)
        self.emit("ASSIGN", -(ctx.sz - i_slot))
        self.emit("BRANCH", loop)
        self.place(end)
        self.pop(ctx, 2)
        self.emit("CONST", 0)

    def args_right_to_left(self, args, ctx: _Fn):
        """Evaluate ``args`` so args[0] is in the accumulator, the rest stacked."""
        for a in reversed(args[1:]):
            self.expr(a, ctx)
            self.push(ctx)
        self.expr(args[0], ctx)

    def prim(self, e: L.Prim, ctx: _Fn):
        op, args = e.op, e.args
        if op == "SETGLOBAL":
            self.expr(args[0], ctx)
            self.emit("SETGLOBAL", e.param)
            return
        if op == "FIELD":
            self.expr(args[0], ctx)
            self.emit("GETFIELD", e.param)
            return
        if op in ("ADDINT", "SUBINT") and type(args[1]) is L.ConstInt:
            self.expr(args[0], ctx)
            k = args[1].value
            self.emit("OFFSETINT", k if op == "ADDINT" else -k)
            return
        if op == "ARRAYGET" and type(args[1]) is L.ConstInt:
            if type(args[0]) is L.GlobalVar:
                self.emit("GETGLOBALITEM", (args[0].symbol, args[1].value))
            else:
                self.expr(args[0], ctx)
                self.emit("GETITEM", args[1].value)
            return
        if op == "ARRAYSET" and type(args[1]) is L.ConstInt:
            self.expr(args[2], ctx)
            self.push(ctx)
            self.expr(args[0], ctx)
            self.emit("SETITEM", args[1].value)
            ctx.sz -= 1
            return
        if op in ("MAKEBLOCK", "MAKEARRAY"):
            self.args_right_to_left(args, ctx)
            self.emit(op, len(args))
            ctx.sz -= len(args) - 1
            return
        if op not in _DIRECT:
            raise ValueError(f"unknown primitive {op}")
        self.args_right_to_left(args, ctx)
        self.emit(op)
        ctx.sz -= len(args) - 1

    def apply(self, e: L.Apply, ctx: _Fn):
        n = len(e.args)
        labels = [_Label() for _ in range(n)]
        for k in reversed(range(n)):
            self.emit("PUSH_RETADDR", labels[k])
            ctx.sz += 2
            self.expr(e.args[k], ctx)
            self.push(ctx)
        self.expr(e.fn, ctx)
        for k in range(n):
            self.emit("APPLY")
            ctx.sz -= 3
            self.place(labels[k])

    def closure(self, fn: L.Fun, ctx: _Fn, self_id):
        fv = sorted(L.free_vars(fn) - ({self_id} if self_id is not None else set()))
        for vid in fv:
            self.access(ctx, vid)
            self.push(ctx)
        label = _Label()
        if self_id is None:
            self.emit("CLOSURE", (label, len(fv)))
        else:
            self.emit("CLOSUREREC", (label, len(fv)))
        ctx.sz -= len(fv)
        env_ids = list(fv) + ([self_id] if self_id is not None else [])
        self.pending.append((label, fn, env_ids))

    def function(self, label: _Label, fn: L.Fun, env_ids: list):
        self.place(label)
        (param,) = fn.params
        ctx = _Fn({vid: i for i, vid in enumerate(env_ids)})
        ctx.sz = 1
        ctx.slots[param] = 0
        self.expr(fn.body, ctx, tail=True)

    def program(self, e) -> BcProgram:
        top = _Fn({})
        self.expr(e, top)
        self.emit("STOP")
        while self.pending:
            label, fn, env_ids = self.pending.pop(0)
            self.function(label, fn, env_ids)
        b = self.base
        for ins in self.code:
            op, arg = ins
            if isinstance(arg, _Label):
                ins[1] = arg.pos + b
            elif isinstance(arg, tuple) and arg and isinstance(arg[0], _Label):
                ins[1] = (arg[0].pos + b, arg[1])
        prog = BcProgram([tuple(i) for i in self.code], b, self.constants, b)
        prog.validate()
        return prog


def compile_bytecode(e, base: int = 0) -> BcProgram:
    """Compile a phrase whose code will be loaded at ``base``."""
    return BytecodeCompiler(base).program(e)
