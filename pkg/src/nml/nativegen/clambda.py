"""Closure conversion: Lambda -> Clambda.

Every ``Fun`` becomes a lifted :class:`CFunction` whose body mentions only
its parameters, its environment parameter (the closure block itself) and
globals.  Nested single-parameter functions merge into one function of up
to ``MAX_ARITY`` parameters.  Closure blocks are ``[code, free vars...]``;
``code`` is the unary entry (the function itself when its arity is 1, a
currying stub otherwise).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..lam import ir as L

MAX_ARITY = 6


@dataclass(frozen=True)
class EnvField:
    """Field ``index`` of closure ``env`` (field 0 is the code pointer)."""
    env: int
    index: int


@dataclass(frozen=True)
class MakeClosure:
    label: str
    arity: int
    captured: tuple


@dataclass(frozen=True)
class DirectCall:
    label: str
    args: tuple
    env: object  # the callee's closure, passed as its environment


@dataclass(frozen=True)
class IndirectCall:
    """Apply an unknown closure to ``args`` one at a time."""
    fn: object
    args: tuple


@dataclass
class CFunction:
    label: str
    params: tuple
    env: int
    body: object
    name: str = ""
    free: tuple = ()

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass
class ClProgram:
    functions: list = field(default_factory=list)
    body: object = None
    exports: dict = field(default_factory=dict)  # global symbol -> (label, arity)


@dataclass
class _Ctx:
    subst: dict  # var id -> replacement expression
    known: dict  # var id -> (label, arity) of a statically known function


class ClosureConverter:
    """``approx`` maps globals of earlier phrases to (label, arity) when they
    hold a known function, so saturated calls to them become direct."""

    def __init__(self, prefix: str, approx: dict | None = None):
        self.prefix = prefix
        self.approx = approx or {}
        self.exports: dict = {}
        self.functions: list[CFunction] = []
        self.counter = itertools.count(1)
        self.ids = itertools.count(1_000_000)

    def label_for(self, name: str) -> str:
        return f"{self.prefix}.{name or 'fun'}.{next(self.counter)}"

    def convert(self, e) -> ClProgram:
        body = self.expr(e, _Ctx({}, {}))
        return ClProgram(self.functions, body, self.exports)

    def var(self, vid: int, ctx: _Ctx, name: str = ""):
        return ctx.subst.get(vid, L.Var(vid, name))

    def expr(self, e, ctx: _Ctx):
        t = type(e)
        if t is L.Var:
            return self.var(e.id, ctx, e.name)
        if t in (L.GlobalVar, L.ConstInt, L.ConstFloat, L.ConstString):
            return e
        if t is L.Fun:
            return self.closure(e, ctx, None, "")
        if t is L.Apply:
            return self.apply(e, ctx)
        if t is L.Let:
            bound = self.expr(e.bound, ctx) if type(e.bound) is not L.Fun else \
                self.closure(e.bound, ctx, None, e.name)
            if type(bound) is MakeClosure:
                ctx = _Ctx(ctx.subst, {**ctx.known, e.id: (_direct_label(bound), bound.arity)})
            return L.Let(e.id, bound, self.expr(e.body, ctx), e.name)
        if t is L.LetRec:
            ((vid, fn),) = e.bindings
            name = e.names[0] if e.names else ""
            clo = self.closure(fn, ctx, vid, name)
            inner = _Ctx(ctx.subst, {**ctx.known, vid: (_direct_label(clo), clo.arity)})
            return L.Let(vid, clo, self.expr(e.body, inner), name)
        if t is L.Prim:
            if e.op == "SETGLOBAL" and type(e.args[0]) is L.Var and e.args[0].id in ctx.known:
                self.exports[e.param] = ctx.known[e.args[0].id]
            return L.Prim(e.op, tuple(self.expr(a, ctx) for a in e.args), e.param)
        if t is L.If:
            return L.If(self.expr(e.cond, ctx), self.expr(e.then, ctx), self.expr(e.orelse, ctx))
        if t is L.While:
            return L.While(self.expr(e.cond, ctx), self.expr(e.body, ctx))
        if t is L.For:
            return L.For(e.id, self.expr(e.lo, ctx), self.expr(e.hi, ctx), self.expr(e.body, ctx), e.name)
        if t is L.Seq:
            return L.Seq(self.expr(e.first, ctx), self.expr(e.second, ctx))
        raise TypeError(e)

    def apply(self, e: L.Apply, ctx: _Ctx):
        args = tuple(self.expr(a, ctx) for a in e.args)
        fn = e.fn
        known = None
        if type(fn) is L.Var and fn.id in ctx.known:
            known, env = ctx.known[fn.id], self.var(fn.id, ctx, fn.name)
        elif type(fn) is L.GlobalVar and fn.symbol in self.approx:
            known, env = self.approx[fn.symbol], fn
        if known is not None and len(args) >= known[1]:
            label, arity = known
            call = DirectCall(label, args[:arity], env)
            return IndirectCall(call, args[arity:]) if len(args) > arity else call
        return IndirectCall(self.expr(fn, ctx), args)

    def closure(self, fn: L.Fun, ctx: _Ctx, self_id, name: str) -> MakeClosure:
        params, body, names = _merge(fn)
        free = sorted(L.free_vars(fn) - ({self_id} if self_id is not None else set()))
        env = next(self.ids)
        subst = {v: EnvField(env, k + 1) for k, v in enumerate(free)}
        known = dict(ctx.known)
        if self_id is not None:
            subst[self_id] = L.Var(env, "self")
        label = self.label_for(name)
        if self_id is not None:
            known[self_id] = (label, len(params))
        # shadowing by parameters: ids are unique, so nothing to remove
        cf = CFunction(label, params, env, None, name, tuple(free))
        self.functions.append(cf)
        cf.body = self.expr(body, _Ctx(subst, known))
        captured = tuple(self.var(v, ctx) for v in free)
        return MakeClosure(label, len(params), captured)


def _direct_label(m: MakeClosure) -> str:
    return m.label


def _merge(fn: L.Fun):
    params = list(fn.params)
    names = list(fn.names or ("",) * len(fn.params))
    body = fn.body
    while type(body) is L.Fun and len(params) + len(body.params) <= MAX_ARITY:
        params += body.params
        names += list(body.names or ("",) * len(body.params))
        body = body.body
    return tuple(params), body, tuple(names)


def entry_label(label: str, arity: int) -> str:
    """Symbol stored in field 0 of a closure for a function of ``arity``."""
    return label if arity == 1 else f"{label}.c1"


def closure_convert(e, prefix: str = "nml_phrase0", approx: dict | None = None) -> ClProgram:
    return ClosureConverter(prefix, approx).convert(e)


def show(e) -> str:
    t = type(e)
    if t is EnvField:
        return f"(envfield {e.index} env/{e.env})"
    if t is MakeClosure:
        return f"(closure {e.label}/{e.arity}" + "".join(" " + show(c) for c in e.captured) + ")"
    if t is DirectCall:
        return f"(direct {e.label} {show(e.env)}" + "".join(" " + show(a) for a in e.args) + ")"
    if t is IndirectCall:
        return "(indirect " + show(e.fn) + "".join(" " + show(a) for a in e.args) + ")"
    if t is L.Fun:
        raise TypeError("unconverted function")
    if t in (L.Var, L.GlobalVar, L.ConstInt, L.ConstFloat, L.ConstString):
        return L.sexpr(e)
    if t is L.Let:
        return f"(let {e.name or 'v'}/{e.id} {show(e.bound)} {show(e.body)})"
    if t is L.Prim:
        parts = [e.op] + ([str(e.param)] if e.param is not None else []) + [show(a) for a in e.args]
        return "(" + " ".join(parts) + ")"
    if t is L.If:
        return f"(if {show(e.cond)} {show(e.then)} {show(e.orelse)})"
    if t is L.While:
        return f"(while {show(e.cond)} {show(e.body)})"
    if t is L.For:
        return f"(for {e.name or 'v'}/{e.id} {show(e.lo)} {show(e.hi)} {show(e.body)})"
    if t is L.Seq:
        return f"(seq {show(e.first)} {show(e.second)})"
    raise TypeError(e)


def dump(p: ClProgram) -> str:
    out = []
    for f in p.functions:
        ps = " ".join(f"p/{i}" for i in f.params)
        out.append(f"(function {f.label} ({ps}) env/{f.env}\n  {show(f.body)})")
    out.append(f"(entry\n  {show(p.body)})")
    return "\n".join(out)


def free_of_function(f: CFunction) -> set:
    """Local variables a lifted body mentions that it does not bind itself."""
    out: set = set()
    _cl_fv(f.body, set(f.params) | {f.env}, out)
    return out


def _cl_fv(e, bound: set, out: set):
    t = type(e)
    if t is L.Var:
        if e.id not in bound:
            out.add(e.id)
    elif t is EnvField:
        if e.env not in bound:
            out.add(e.env)
    elif t is MakeClosure:
        for c in e.captured:
            _cl_fv(c, bound, out)
    elif t is DirectCall:
        _cl_fv(e.env, bound, out)
        for a in e.args:
            _cl_fv(a, bound, out)
    elif t is IndirectCall:
        _cl_fv(e.fn, bound, out)
        for a in e.args:
            _cl_fv(a, bound, out)
    elif t is L.Let:
        _cl_fv(e.bound, bound, out)
        _cl_fv(e.body, bound | {e.id}, out)
    elif t is L.Prim:
        for a in e.args:
            _cl_fv(a, bound, out)
    elif t is L.If:
        for x in (e.cond, e.then, e.orelse):
            _cl_fv(x, bound, out)
    elif t is L.While:
        _cl_fv(e.cond, bound, out)
        _cl_fv(e.body, bound, out)
    elif t is L.For:
        _cl_fv(e.lo, bound, out)
        _cl_fv(e.hi, bound, out)
        _cl_fv(e.body, bound | {e.id}, out)
    elif t is L.Seq:
        _cl_fv(e.first, bound, out)
        _cl_fv(e.second, bound, out)
