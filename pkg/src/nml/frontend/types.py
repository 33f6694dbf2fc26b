"""Type terms, schemes and their textual rendering."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


class TVar:
    """A unification variable; ``ref`` points at its binding once unified."""

    __slots__ = ("id", "ref", "level")

    def __init__(self, id: int, level: int = 0):
        self.id = id
        self.ref: Optional[object] = None
        self.level = level

    def __repr__(self):
        if self.ref is not None:
            return repr(self.ref)
        return f"'t{self.id}"

    def __eq__(self, other):
        a, b = prune(self), prune(other)
        if isinstance(a, TVar) and isinstance(b, TVar):
            return a.id == b.id
        if isinstance(a, TVar) or isinstance(b, TVar):
            return False
        return a == b

    def __hash__(self):
        t = prune(self)
        return hash(("var", t.id)) if isinstance(t, TVar) else hash(t)


@dataclass(frozen=True, eq=True)
class TCon:
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class TArray:
    elem: object


@dataclass(frozen=True)
class TTuple:
    elems: tuple


@dataclass(frozen=True)
class TArrow:
    param: object
    result: object


INT = TCon("int")
FLOAT = TCon("float")
BOOL = TCon("bool")
UNIT = TCon("unit")
STRING = TCon("string")


def arrow(*ts):
    """``arrow(a, b, c)`` is ``a -> b -> c``."""
    t = ts[-1]
    for p in reversed(ts[:-1]):
        t = TArrow(p, t)
    return t


def prune(t):
    while isinstance(t, TVar) and t.ref is not None:
        t = t.ref
    return t


def resolve(t):
    """A copy of ``t`` with every bound variable replaced by its binding."""
    t = prune(t)
    if isinstance(t, TVar) or isinstance(t, TCon):
        return t
    if isinstance(t, TArray):
        return TArray(resolve(t.elem))
    if isinstance(t, TTuple):
        return TTuple(tuple(resolve(x) for x in t.elems))
    return TArrow(resolve(t.param), resolve(t.result))


def free_vars(t) -> list:
    """Unbound variables of ``t`` in first-occurrence order."""
    out: list = []
    seen: set = set()

    def go(t):
        t = prune(t)
        if isinstance(t, TVar):
            if t.id not in seen:
                seen.add(t.id)
                out.append(t)
        elif isinstance(t, TArray):
            go(t.elem)
        elif isinstance(t, TTuple):
            for x in t.elems:
                go(x)
        elif isinstance(t, TArrow):
            go(t.param)
            go(t.result)

    go(t)
    return out


@dataclass(frozen=True)
class TypeScheme:
    quantified: frozenset
    body: object

    @staticmethod
    def mono(t) -> "TypeScheme":
        return TypeScheme(frozenset(), t)


def _var_name(i: int) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    name = letters[i % 26]
    return name if i < 26 else f"{name}{i // 26}"


def format_type(t, weak: bool = False) -> str:
    """Render a type; variables become ``'a``, ``'b``, ... by first occurrence.

    With ``weak`` the variables are printed ``'_a`` (not generalizable).
    """
    names: dict = {}
    prefix = "'_" if weak else "'"

    def go(t, ctx: int) -> str:
        # ctx: 0 top / arrow result, 1 arrow param, 2 tuple element, 3 array element
        t = prune(t)
        if isinstance(t, TVar):
            if t.id not in names:
                names[t.id] = prefix + _var_name(len(names))
            return names[t.id]
        if isinstance(t, TCon):
            return t.name
        if isinstance(t, TArray):
            return f"{go(t.elem, 3)} array"
        if isinstance(t, TTuple):
            s = " * ".join(go(x, 2) for x in t.elems)
            return f"({s})" if ctx >= 2 else s
        s = f"{go(t.param, 1)} -> {go(t.result, 0)}"
        return f"({s})" if ctx >= 1 else s

    return go(t, 0)
