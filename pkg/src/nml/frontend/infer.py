"""Hindley-Milner inference with let-polymorphism and the value restriction.

Unification is destructive on the fresh variables of the phrase being typed;
generalisation uses levels.  The session ``TypeEnv`` only ever holds fully
generalised schemes, so typing a phrase never mutates it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from ..errors import TypingError
from ..prims import BUILTINS
from .types import (BOOL, FLOAT, INT, STRING, UNIT, TArray, TArrow, TCon,
                    TTuple, TVar, TypeScheme, format_type, free_vars, prune,
                    resolve)


@dataclass(frozen=True)
class EnvEntry:
    scheme: TypeScheme
    symbol: Optional[str] = None  # session global symbol
    prim: Optional[str] = None  # builtin primitive
    arity: int = 0


class TypeEnv:
    """Persistent identifier map; ``extend`` returns a new environment."""

    def __init__(self, entries: Optional[dict] = None):
        self._entries = dict(entries or {})

    @classmethod
    def initial(cls) -> "TypeEnv":
        return cls({name: EnvEntry(scheme, prim=prim, arity=arity)
                    for name, (scheme, prim, arity) in BUILTINS.items()})

    def lookup(self, name: str) -> Optional[EnvEntry]:
        return self._entries.get(name)

    def extend(self, bindings: dict) -> "TypeEnv":
        entries = dict(self._entries)
        entries.update(bindings)
        return TypeEnv(entries)

    def names(self):
        return self._entries.keys()

    def __contains__(self, name):
        return name in self._entries


@dataclass
class Binding:
    name: str
    scheme: TypeScheme
    symbol: Optional[str]


@dataclass
class TypedPhrase:
    """The typed tree of a phrase: ``root`` has ``ty`` set on every expression node."""
    root: object
    ty: object
    bindings: list = field(default_factory=list)
    generalized: bool = True

    @property
    def is_definition(self) -> bool:
        return isinstance(self.root, A.Def)


def is_nonexpansive(e) -> bool:
    if isinstance(e, (A.Const, A.Var, A.Fun)):
        return True
    if isinstance(e, A.Tuple):
        return all(is_nonexpansive(x) for x in e.items)
    return False


class Inferencer:
    def __init__(self, env: TypeEnv):
        self.env = env
        self.level = 0
        self.counter = 0
        self.typed_nodes: list = []

    def fresh(self) -> TVar:
        v = TVar(self.counter, self.level)
        self.counter += 1
        return v

    # -- schemes --
    def instantiate(self, s: TypeScheme):
        if not s.quantified:
            return s.body
        mapping: dict = {}

        def go(t):
            t = prune(t)
            if isinstance(t, TVar):
                if t.id in s.quantified:
                    if t.id not in mapping:
                        mapping[t.id] = self.fresh()
                    return mapping[t.id]
                return t
            if isinstance(t, TArray):
                return TArray(go(t.elem))
            if isinstance(t, TTuple):
                return TTuple(tuple(go(x) for x in t.elems))
            if isinstance(t, TArrow):
                return TArrow(go(t.param), go(t.result))
            return t

        return go(s.body)

    def generalize(self, t) -> TypeScheme:
        qs = [v for v in free_vars(t) if v.level > self.level]
        return TypeScheme(frozenset(v.id for v in qs), t)

    # -- unification --
    def unify(self, a, b, node, expected_first=False):
        try:
            self._unify(a, b)
        except _Mismatch as m:
            if m.occurs:
                raise TypingError(
                    f"occurs check: the type variable {format_type(m.a)} occurs "
                    f"inside {format_type(m.b)}", node.span) from None
            actual, expected = (b, a) if expected_first else (a, b)
            raise TypingError(
                f"this expression has type {format_type(actual)} but an expression "
                f"was expected of type {format_type(expected)}", node.span) from None

    def _unify(self, a, b):
        a, b = prune(a), prune(b)
        if a is b:
            return
        if isinstance(a, TVar):
            self._bind(a, b)
        elif isinstance(b, TVar):
            self._bind(b, a)
        elif isinstance(a, TCon) and isinstance(b, TCon):
            if a.name != b.name:
                raise _Mismatch(a, b)
        elif isinstance(a, TArray) and isinstance(b, TArray):
            self._unify(a.elem, b.elem)
        elif isinstance(a, TTuple) and isinstance(b, TTuple):
            if len(a.elems) != len(b.elems):
                raise _Mismatch(a, b)
            for x, y in zip(a.elems, b.elems):
                self._unify(x, y)
        elif isinstance(a, TArrow) and isinstance(b, TArrow):
            self._unify(a.param, b.param)
            self._unify(a.result, b.result)
        else:
            raise _Mismatch(a, b)

    def _bind(self, v: TVar, t):
        if isinstance(t, TVar):
            if t.level > v.level:
                t.level = v.level
            v.ref = t
            return
        self._occurs_adjust(v, t, t)
        v.ref = t

    def _occurs_adjust(self, v: TVar, t, whole):
        t = prune(t)
        if isinstance(t, TVar):
            if t is v:
                raise _Mismatch(v, whole, occurs=True)
            if t.level > v.level:
                t.level = v.level
        elif isinstance(t, TArray):
            self._occurs_adjust(v, t.elem, whole)
        elif isinstance(t, TTuple):
            for x in t.elems:
                self._occurs_adjust(v, x, whole)
        elif isinstance(t, TArrow):
            self._occurs_adjust(v, t.param, whole)
            self._occurs_adjust(v, t.result, whole)

    # -- expressions --
    def infer(self, e, locals_: dict):
        t = self._infer(e, locals_)
        e.ty = t
        self.typed_nodes.append(e)
        return t

    def check(self, e, expected, locals_: dict):
        t = self.infer(e, locals_)
        self.unify(t, expected, e)
        return t

    def _infer(self, e, locals_):
        if isinstance(e, A.Const):
            return {"int": INT, "float": FLOAT, "bool": BOOL, "unit": UNIT,
                    "string": STRING}[e.kind]
        if isinstance(e, A.Var):
            if e.name in locals_:
                return self.instantiate(locals_[e.name])
            entry = self.env.lookup(e.name)
            if entry is None:
                raise TypingError(f"unbound value {e.name}", e.span)
            return self.instantiate(entry.scheme)
        if isinstance(e, A.Fun):
            inner = dict(locals_)
            ptys = []
            for p in e.params:
                ptys.append(self.bind_param(p, inner))
            t = self.infer(e.body, inner)
            for pt in reversed(ptys):
                t = TArrow(pt, t)
            return t
        if isinstance(e, A.App):
            t = self.infer(e.fn, locals_)
            for arg in e.args:
                at = self.infer(arg, locals_)
                res = self.fresh()
                fn_t = prune(t)
                if isinstance(fn_t, TArrow):
                    self.unify(at, fn_t.param, arg)
                    self.unify(fn_t.result, res, e)
                elif isinstance(fn_t, TVar):
                    self.unify(fn_t, TArrow(at, res), e.fn)
                else:
                    raise TypingError(
                        f"this expression has type {format_type(fn_t)}; it is not a "
                        f"function and cannot be applied", e.fn.span)
                t = res
            return t
        if isinstance(e, A.BinOp):
            op = e.op
            if op in ("+", "-", "*", "/", "mod"):
                self.check(e.left, INT, locals_)
                self.check(e.right, INT, locals_)
                return INT
            if op in ("+.", "-.", "*.", "/."):
                self.check(e.left, FLOAT, locals_)
                self.check(e.right, FLOAT, locals_)
                return FLOAT
            if op in ("&&", "||"):
                self.check(e.left, BOOL, locals_)
                self.check(e.right, BOOL, locals_)
                return BOOL
            self.check(e.left, INT, locals_)
            self.check(e.right, INT, locals_)
            return BOOL
        if isinstance(e, A.UnOp):
            t = INT if e.op == "-" else FLOAT
            self.check(e.operand, t, locals_)
            return t
        if isinstance(e, A.If):
            self.check(e.cond, BOOL, locals_)
            t = self.infer(e.then, locals_)
            if e.orelse is None:
                self.unify(t, UNIT, e.then)
                return UNIT
            self.check(e.orelse, t, locals_)
            return t
        if isinstance(e, A.Seq):
            self.infer(e.first, locals_)
            return self.infer(e.second, locals_)
        if isinstance(e, A.LetIn):
            inner = self.infer_let(e.rec, e.pat, e.bound, locals_)
            return self.infer(e.body, inner)
        if isinstance(e, A.Tuple):
            return TTuple(tuple(self.infer(x, locals_) for x in e.items))
        if isinstance(e, A.ArrayLit):
            elem = self.fresh()
            for x in e.items:
                self.check(x, elem, locals_)
            return TArray(elem)
        if isinstance(e, A.Index):
            elem = self.fresh()
            self.check(e.array, TArray(elem), locals_)
            self.check(e.index, INT, locals_)
            return elem
        if isinstance(e, A.Assign):
            elem = self.fresh()
            self.check(e.array, TArray(elem), locals_)
            self.check(e.index, INT, locals_)
            self.check(e.value, elem, locals_)
            return UNIT
        if isinstance(e, A.While):
            self.check(e.cond, BOOL, locals_)
            self.infer(e.body, locals_)
            return UNIT
        if isinstance(e, A.For):
            self.check(e.lo, INT, locals_)
            self.check(e.hi, INT, locals_)
            inner = dict(locals_)
            inner[e.var] = TypeScheme.mono(INT)
            self.infer(e.body, inner)
            return UNIT
        raise TypeError(f"cannot type {e!r}")

    def bind_param(self, p, scope: dict):
        if isinstance(p, A.PVar):
            v = self.fresh()
            scope[p.name] = TypeScheme.mono(v)
            return v
        if isinstance(p, A.PUnit):
            return UNIT
        return self.fresh()

    def infer_let(self, rec: bool, pat, bound, locals_: dict) -> dict:
        """Type a binding; returns the scope extended with its generalised names."""
        inner = dict(locals_)
        self.level += 1
        if rec:
            fv = self.fresh()
            rec_scope = dict(locals_)
            rec_scope[pat.name] = TypeScheme.mono(fv)
            t = self.infer(bound, rec_scope)
            self.unify(fv, t, bound)
        else:
            t = self.infer(bound, locals_)
        pat_t = self.pattern_type(pat, bound)
        self.unify(t, pat_t, bound, expected_first=False)
        self.level -= 1
        gen = is_nonexpansive(bound)
        for name, nt in self.pattern_bindings(pat, pat_t):
            inner[name] = self.generalize(nt) if gen else TypeScheme.mono(nt)
        return inner

    def pattern_type(self, p, node):
        if isinstance(p, (A.PVar, A.PWild)):
            return self.fresh()
        if isinstance(p, A.PUnit):
            return UNIT
        return TTuple(tuple(self.pattern_type(q, node) for q in p.items))

    def pattern_bindings(self, p, t):
        t = prune(t)
        if isinstance(p, A.PVar):
            return [(p.name, t)]
        if isinstance(p, A.PTuple):
            out = []
            for q, qt in zip(p.items, t.elems):
                out.extend(self.pattern_bindings(q, qt))
            return out
        return []

    def finish(self):
        for node in self.typed_nodes:
            node.ty = resolve(node.ty)


class _Mismatch(Exception):
    def __init__(self, a, b, occurs=False):
        self.a, self.b, self.occurs = a, b, occurs


def canonical_scheme(s: TypeScheme) -> TypeScheme:
    """Renumber quantified variables 0..k-1 by first occurrence."""
    body = resolve(s.body)
    order = [v for v in free_vars(body) if v.id in s.quantified]
    mapping = {v.id: TVar(i) for i, v in enumerate(order)}

    def go(t):
        if isinstance(t, TVar):
            return mapping.get(t.id, t)
        if isinstance(t, TArray):
            return TArray(go(t.elem))
        if isinstance(t, TTuple):
            return TTuple(tuple(go(x) for x in t.elems))
        if isinstance(t, TArrow):
            return TArrow(go(t.param), go(t.result))
        return t

    return TypeScheme(frozenset(range(len(order))), go(body))


def infer_phrase(env: TypeEnv, root, symbol_for=None):
    """Type a parsed phrase.

    ``symbol_for(name)`` gives the global symbol of a root-level binding.
    Returns ``(TypedPhrase, new_env)``; the input env is never modified.
    """
    inf = Inferencer(env)
    if isinstance(root, A.Def):
        scope = inf.infer_let(root.rec, root.pat, root.bound, {})
        inf.finish()
        bindings = []
        new = {}
        for name in A.pattern_names(root.pat):
            scheme = scope[name]
            if free_vars(scheme.body) and len(scheme.quantified) < len(free_vars(scheme.body)):
                raise TypingError(
                    f"the type of this expression, {format_type(scheme.body, weak=True)}, "
                    f"contains type variables that cannot be generalized", root.bound.span)
            scheme = canonical_scheme(scheme)
            sym = symbol_for(name) if symbol_for else None
            bindings.append(Binding(name, scheme, sym))
            new[name] = EnvEntry(scheme, symbol=sym)
        return TypedPhrase(root, resolve(root.bound.ty), bindings), env.extend(new)
    inf.level += 1
    t = inf.infer(root, {})
    inf.level -= 1
    inf.finish()
    return TypedPhrase(root, resolve(t), [], generalized=is_nonexpansive(root)), env
