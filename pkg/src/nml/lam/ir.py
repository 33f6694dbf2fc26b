"""Untyped lambda IR shared by both backends.

Binders are integers unique within a phrase; ``name`` fields are hints for
dumps and are ignored by equality.  Booleans and unit are ``ConstInt``
(false/unit = 0, true = 1).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.printer import show_float, show_string


def _hint():
    return field(default="", compare=False)


@dataclass(frozen=True)
class Var:
    id: int
    name: str = _hint()


@dataclass(frozen=True)
class GlobalVar:
    symbol: str


@dataclass(frozen=True)
class ConstInt:
    value: int


@dataclass(frozen=True)
class ConstFloat:
    value: float


@dataclass(frozen=True)
class ConstString:
    value: str


@dataclass(frozen=True)
class Fun:
    params: tuple
    body: object
    names: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class Apply:
    fn: object
    args: tuple


@dataclass(frozen=True)
class Let:
    id: int
    bound: object
    body: object
    name: str = _hint()


@dataclass(frozen=True)
class LetRec:
    bindings: tuple  # ((id, Fun), ...)
    body: object
    names: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class Prim:
    op: str
    args: tuple
    param: object = None  # field index for FIELD, symbol for SETGLOBAL


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object


@dataclass(frozen=True)
class While:
    cond: object
    body: object


@dataclass(frozen=True)
class For:
    id: int
    lo: object
    hi: object
    body: object
    name: str = _hint()


@dataclass(frozen=True)
class Seq:
    first: object
    second: object


UNIT = ConstInt(0)


def free_vars(e) -> set:
    """Free local binder ids of ``e`` (globals excluded)."""
    out: set = set()
    _fv(e, set(), out)
    return out


def _fv(e, bound: set, out: set):
    t = type(e)
    if t is Var:
        if e.id not in bound:
            out.add(e.id)
    elif t in (GlobalVar, ConstInt, ConstFloat, ConstString):
        pass
    elif t is Fun:
        _fv(e.body, bound | set(e.params), out)
    elif t is Apply:
        _fv(e.fn, bound, out)
        for a in e.args:
            _fv(a, bound, out)
    elif t is Let:
        _fv(e.bound, bound, out)
        _fv(e.body, bound | {e.id}, out)
    elif t is LetRec:
        inner = bound | {i for i, _ in e.bindings}
        for _, f in e.bindings:
            _fv(f, inner, out)
        _fv(e.body, inner, out)
    elif t is Prim:
        for a in e.args:
            _fv(a, bound, out)
    elif t is If:
        _fv(e.cond, bound, out)
        _fv(e.then, bound, out)
        _fv(e.orelse, bound, out)
    elif t is While:
        _fv(e.cond, bound, out)
        _fv(e.body, bound, out)
    elif t is For:
        _fv(e.lo, bound, out)
        _fv(e.hi, bound, out)
        _fv(e.body, bound | {e.id}, out)
    elif t is Seq:
        _fv(e.first, bound, out)
        _fv(e.second, bound, out)
    else:
        raise TypeError(e)


def globals_used(e) -> set:
    out: set = set()
    stack = [e]
    while stack:
        x = stack.pop()
        t = type(x)
        if t is GlobalVar:
            out.add(x.symbol)
        elif t is Fun:
            stack.append(x.body)
        elif t is Apply:
            stack.append(x.fn)
            stack.extend(x.args)
        elif t is Let:
            stack += [x.bound, x.body]
        elif t is LetRec:
            stack.extend(f for _, f in x.bindings)
            stack.append(x.body)
        elif t is Prim:
            stack.extend(x.args)
        elif t is If:
            stack += [x.cond, x.then, x.orelse]
        elif t is While:
            stack += [x.cond, x.body]
        elif t is For:
            stack += [x.lo, x.hi, x.body]
        elif t is Seq:
            stack += [x.first, x.second]
    return out


def _v(i: int, name: str) -> str:
    return f"{name or 'v'}/{i}"


def sexpr(e) -> str:
    t = type(e)
    if t is Var:
        return _v(e.id, e.name)
    if t is GlobalVar:
        return f"(global {e.symbol})"
    if t is ConstInt:
        return str(e.value)
    if t is ConstFloat:
        return show_float(e.value)
    if t is ConstString:
        return show_string(e.value)
    if t is Fun:
        names = e.names or ("",) * len(e.params)
        ps = " ".join(_v(i, n) for i, n in zip(e.params, names))
        return f"(fun ({ps}) {sexpr(e.body)})"
    if t is Apply:
        return "(apply " + " ".join(sexpr(x) for x in (e.fn, *e.args)) + ")"
    if t is Let:
        return f"(let {_v(e.id, e.name)} {sexpr(e.bound)} {sexpr(e.body)})"
    if t is LetRec:
        names = e.names or ("",) * len(e.bindings)
        bs = " ".join(f"({_v(i, n)} {sexpr(f)})" for (i, f), n in zip(e.bindings, names))
        return f"(letrec ({bs}) {sexpr(e.body)})"
    if t is Prim:
        parts = [e.op]
        if e.param is not None:
            parts.append(str(e.param))
        parts += [sexpr(a) for a in e.args]
        return "(" + " ".join(parts) + ")"
    if t is If:
        return f"(if {sexpr(e.cond)} {sexpr(e.then)} {sexpr(e.orelse)})"
    if t is While:
        return f"(while {sexpr(e.cond)} {sexpr(e.body)})"
    if t is For:
        return f"(for {_v(e.id, e.name)} {sexpr(e.lo)} {sexpr(e.hi)} {sexpr(e.body)})"
    if t is Seq:
        return f"(seq {sexpr(e.first)} {sexpr(e.second)})"
    raise TypeError(e)
