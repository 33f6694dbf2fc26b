"""Semantics-preserving lambda rewrites, iterated to a fixpoint.

Rewrites: inlining of lets bound to integer constants or variables, dead
pure-let elimination, integer/boolean constant folding, ``if`` on a constant,
and right-nesting of ``Seq``.
"""
from __future__ import annotations

from ..frontend.lexer import wrap63
from ..prims import PURE
from . import ir as L

MAX_ROUNDS = 50


def int_div(a: int, b: int) -> int:
    """Truncating division (sign of the quotient as in machine ``idiv``)."""
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def int_mod(a: int, b: int) -> int:
    return a - b * int_div(a, b)


def fold_int(op: str, a: int, b: int):
    """Fold an integer primitive on constants; None when it must stay (trap)."""
    if op == "ADDINT":
        return wrap63(a + b)
    if op == "SUBINT":
        return wrap63(a - b)
    if op == "MULINT":
        return wrap63(a * b)
    if op == "DIVINT":
        return None if b == 0 else wrap63(int_div(a, b))
    if op == "MODINT":
        return None if b == 0 else wrap63(int_mod(a, b))
    if op == "EQ":
        return int(a == b)
    if op == "NE":
        return int(a != b)
    if op == "LT":
        return int(a < b)
    if op == "LE":
        return int(a <= b)
    if op == "GT":
        return int(a > b)
    if op == "GE":
        return int(a >= b)
    return None


def is_pure(e) -> bool:
    t = type(e)
    if t in (L.Var, L.GlobalVar, L.ConstInt, L.ConstFloat, L.ConstString, L.Fun):
        return True
    if t is L.Prim:
        return e.op in PURE and all(is_pure(a) for a in e.args)
    return False


def substitute(e, i: int, value):
    """Replace free occurrences of binder ``i`` in ``e`` by ``value``.

    Binder ids are unique per phrase and ``value`` is a constant or a variable
    bound outside ``e``, so no capture can happen.
    """
    t = type(e)
    if t is L.Var:
        return value if e.id == i else e
    if t in (L.GlobalVar, L.ConstInt, L.ConstFloat, L.ConstString):
        return e
    s = lambda x: substitute(x, i, value)  # noqa: E731
    if t is L.Fun:
        return L.Fun(e.params, s(e.body), e.names)
    if t is L.Apply:
        return L.Apply(s(e.fn), tuple(s(a) for a in e.args))
    if t is L.Let:
        return L.Let(e.id, s(e.bound), s(e.body), e.name)
    if t is L.LetRec:
        return L.LetRec(tuple((j, s(f)) for j, f in e.bindings), s(e.body), e.names)
    if t is L.Prim:
        return L.Prim(e.op, tuple(s(a) for a in e.args), e.param)
    if t is L.If:
        return L.If(s(e.cond), s(e.then), s(e.orelse))
    if t is L.While:
        return L.While(s(e.cond), s(e.body))
    if t is L.For:
        return L.For(e.id, s(e.lo), s(e.hi), s(e.body), e.name)
    if t is L.Seq:
        return L.Seq(s(e.first), s(e.second))
    raise TypeError(e)


def _step(e):
    t = type(e)
    if t in (L.Var, L.GlobalVar, L.ConstInt, L.ConstFloat, L.ConstString):
        return e
    if t is L.Fun:
        return L.Fun(e.params, _step(e.body), e.names)
    if t is L.Apply:
        return L.Apply(_step(e.fn), tuple(_step(a) for a in e.args))
    if t is L.Let:
        bound = _step(e.bound)
        body = _step(e.body)
        if isinstance(bound, (L.ConstInt, L.Var)):
            return substitute(body, e.id, bound)
        if is_pure(bound) and e.id not in L.free_vars(body):
            return body
        return L.Let(e.id, bound, body, e.name)
    if t is L.LetRec:
        bindings = tuple((j, _step(f)) for j, f in e.bindings)
        body = _step(e.body)
        used = L.free_vars(body)
        if not any(j in used for j, _ in bindings):
            return body
        return L.LetRec(bindings, body, e.names)
    if t is L.Prim:
        args = tuple(_step(a) for a in e.args)
        if len(args) == 2 and all(type(a) is L.ConstInt for a in args):
            v = fold_int(e.op, args[0].value, args[1].value)
            if v is not None:
                return L.ConstInt(v)
        if e.op == "NOT" and type(args[0]) is L.ConstInt:
            return L.ConstInt(1 - args[0].value)
        return L.Prim(e.op, args, e.param)
    if t is L.If:
        cond = _step(e.cond)
        if type(cond) is L.ConstInt:
            return _step(e.then) if cond.value else _step(e.orelse)
        return L.If(cond, _step(e.then), _step(e.orelse))
    if t is L.While:
        return L.While(_step(e.cond), _step(e.body))
    if t is L.For:
        return L.For(e.id, _step(e.lo), _step(e.hi), _step(e.body), e.name)
    if t is L.Seq:
        first = _step(e.first)
        second = _step(e.second)
        if type(first) is L.Seq:
            return L.Seq(first.first, L.Seq(first.second, second))
        return L.Seq(first, second)
    raise TypeError(e)


def simplify(e):
    for _ in range(MAX_ROUNDS):
        nxt = _step(e)
        if nxt == e:
            return e
        e = nxt
    return e
