"""Typed tree -> lambda IR."""
from __future__ import annotations

import itertools

from ..frontend import ast as A
from ..frontend.infer import TypedPhrase, TypeEnv
from ..prims import BINOP_PRIMS, PRIM_ARITY
from . import ir as L


class Translator:
    def __init__(self, env: TypeEnv):
        self.env = env
        self.ids = itertools.count(1)

    def fresh(self) -> int:
        return next(self.ids)

    def var(self, name: str, scope: dict):
        if name in scope:
            return L.Var(scope[name], name)
        entry = self.env.lookup(name)
        if entry is None:
            raise KeyError(name)
        if entry.prim is not None:
            return self.eta(entry.prim, entry.arity)
        return L.GlobalVar(entry.symbol)

    def eta(self, op: str, arity: int):
        ids = [self.fresh() for _ in range(arity)]
        body = L.Prim(op, tuple(L.Var(i, f"p{k}") for k, i in enumerate(ids)))
        for k, i in reversed(list(enumerate(ids))):
            body = L.Fun((i,), body, (f"p{k}",))
        return body

    def expr(self, e, scope: dict):
        if isinstance(e, A.Const):
            if e.kind == "int":
                return L.ConstInt(e.value)
            if e.kind == "bool":
                return L.ConstInt(1 if e.value else 0)
            if e.kind == "unit":
                return L.UNIT
            if e.kind == "float":
                return L.ConstFloat(e.value)
            return L.ConstString(e.value)
        if isinstance(e, A.Var):
            return self.var(e.name, scope)
        if isinstance(e, A.Fun):
            return self.fun(e.params, e.body, scope)
        if isinstance(e, A.App):
            return self.app(e, scope)
        if isinstance(e, A.BinOp):
            left = self.expr(e.left, scope)
            right = self.expr(e.right, scope)
            if e.op == "&&":
                return L.If(left, right, L.ConstInt(0))
            if e.op == "||":
                return L.If(left, L.ConstInt(1), right)
            return L.Prim(BINOP_PRIMS[e.op], (left, right))
        if isinstance(e, A.UnOp):
            x = self.expr(e.operand, scope)
            if e.op == "-":
                return L.Prim("SUBINT", (L.ConstInt(0), x))
            return L.Prim("SUBFLOAT", (L.ConstFloat(-0.0), x))
        if isinstance(e, A.If):
            orelse = self.expr(e.orelse, scope) if e.orelse is not None else L.UNIT
            return L.If(self.expr(e.cond, scope), self.expr(e.then, scope), orelse)
        if isinstance(e, A.Seq):
            return L.Seq(self.expr(e.first, scope), self.expr(e.second, scope))
        if isinstance(e, A.LetIn):
            return self.let(e.rec, e.pat, e.bound, scope,
                            lambda inner: self.expr(e.body, inner))
        if isinstance(e, A.Tuple):
            return L.Prim("MAKEBLOCK", tuple(self.expr(x, scope) for x in e.items))
        if isinstance(e, A.ArrayLit):
            if not e.items:
                return L.Prim("ARRAYMAKE", (L.ConstInt(0), L.ConstInt(0)))
            return L.Prim("MAKEARRAY", tuple(self.expr(x, scope) for x in e.items))
        if isinstance(e, A.Index):
            return L.Prim("ARRAYGET", (self.expr(e.array, scope), self.expr(e.index, scope)))
        if isinstance(e, A.Assign):
            return L.Prim("ARRAYSET", (self.expr(e.array, scope), self.expr(e.index, scope),
                                       self.expr(e.value, scope)))
        if isinstance(e, A.While):
            return L.While(self.expr(e.cond, scope), self.expr(e.body, scope))
        if isinstance(e, A.For):
            i = self.fresh()
            inner = dict(scope)
            inner[e.var] = i
            return L.For(i, self.expr(e.lo, scope), self.expr(e.hi, scope),
                         self.expr(e.body, inner), e.var)
        raise TypeError(e)

    def fun(self, params, body, scope):
        inner = dict(scope)
        ids = []
        names = []
        for p in params:
            i = self.fresh()
            ids.append(i)
            if isinstance(p, A.PVar):
                inner[p.name] = i
                names.append(p.name)
            else:
                names.append("_")
        out = self.expr(body, inner)
        for i, n in reversed(list(zip(ids, names))):
            out = L.Fun((i,), out, (n,))
        return out

    def app(self, e: A.App, scope):
        args = [self.expr(a, scope) for a in e.args]
        fn = e.fn
        if isinstance(fn, A.Var) and fn.name not in scope:
            entry = self.env.lookup(fn.name)
            if entry is not None and entry.prim is not None and len(args) >= entry.arity:
                k = entry.arity
                call = L.Prim(entry.prim, tuple(args[:k]))
                return L.Apply(call, tuple(args[k:])) if len(args) > k else call
        return L.Apply(self.expr(fn, scope), tuple(args))

    def let(self, rec, pat, bound, scope, body_fn):
        if rec:
            i = self.fresh()
            inner = dict(scope)
            inner[pat.name] = i
            f = self.expr(bound, inner)
            return L.LetRec(((i, f),), body_fn(inner), (pat.name,))
        b = self.expr(bound, scope)
        inner = dict(scope)
        if isinstance(pat, A.PVar):
            i = self.fresh()
            inner[pat.name] = i
            return L.Let(i, b, body_fn(inner), pat.name)
        t = self.fresh()
        binds = self.destructure(pat, t, inner)
        body = body_fn(inner)
        for i, proj, name in reversed(binds):
            body = L.Let(i, proj, body, name)
        return L.Let(t, b, body, "_")

    def destructure(self, pat, t: int, inner: dict) -> list:
        """(id, projection, name) bindings for a tuple pattern over variable ``t``."""
        out = []
        if not isinstance(pat, A.PTuple):
            return out
        for k, q in enumerate(pat.items):
            proj = L.Prim("FIELD", (L.Var(t),), k)
            if isinstance(q, A.PVar):
                i = self.fresh()
                inner[q.name] = i
                out.append((i, proj, q.name))
            elif isinstance(q, A.PTuple):
                s = self.fresh()
                out.append((s, proj, "_"))
                out.extend(self.destructure(q, s, inner))
        return out


def translate(tp: TypedPhrase, env: TypeEnv):
    """Translate a typed phrase; ``env`` is the environment *before* the phrase."""
    tr = Translator(env)
    root = tp.root
    if not isinstance(root, A.Def):
        return tr.expr(root, {})
    symbols = {b.name: b.symbol for b in tp.bindings}

    def set_globals(inner):
        # the phrase's value is the last bound name (unit when nothing is bound)
        names = A.pattern_names(root.pat)
        body = L.Var(inner[names[-1]], names[-1]) if names else L.UNIT
        for name in reversed(names):
            body = L.Seq(L.Prim("SETGLOBAL", (L.Var(inner[name], name),), symbols[name]), body)
        return body

    if isinstance(root.pat, A.PWild):
        return tr.expr(root.bound, {})
    return tr.let(root.rec, root.pat, root.bound, {}, set_globals)


def check_arity(e) -> None:
    """Assert that every Prim node has its operator's arity."""
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, L.Prim):
            n = PRIM_ARITY[x.op]
            assert n < 0 or n == len(x.args), (x.op, len(x.args))
        for f in getattr(x, "__dataclass_fields__", {}):
            v = getattr(x, f)
            if isinstance(v, tuple):
                for y in v:
                    if isinstance(y, tuple):
                        stack.extend(z for z in y if hasattr(z, "__dataclass_fields__"))
                    elif hasattr(y, "__dataclass_fields__"):
                        stack.append(y)
            elif hasattr(v, "__dataclass_fields__"):
                stack.append(v)
