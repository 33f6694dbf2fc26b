"""Surface syntax tree for MiniML phrases.

Every node carries a ``span`` of byte offsets into the phrase text.  Spans and
the ``ty`` slot filled in by inference are excluded from equality, so two trees
compare equal when they have the same structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Span = tuple[int, int]


def _span() -> Span:
    return field(default=(0, 0), compare=False, repr=False)


def _ty():
    return field(default=None, compare=False, repr=False)


# -- patterns ---------------------------------------------------------------

@dataclass
class PVar:
    name: str
    span: Span = _span()


@dataclass
class PWild:
    span: Span = _span()


@dataclass
class PUnit:
    span: Span = _span()


@dataclass
class PTuple:
    items: list
    span: Span = _span()


Pattern = Union[PVar, PWild, PUnit, PTuple]


def pattern_names(p: Pattern) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PTuple):
        return [n for q in p.items for n in pattern_names(q)]
    return []


# -- expressions --------------------------------------------------------------

@dataclass
class Const:
    value: object
    kind: str  # int | float | bool | unit | string
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Var:
    name: str
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Fun:
    params: list
    body: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class App:
    fn: object
    args: list
    span: Span = _span()
    ty: object = _ty()


@dataclass
class BinOp:
    op: str
    left: object
    right: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class UnOp:
    op: str  # '-' or '-.'
    operand: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class If:
    cond: object
    then: object
    orelse: Optional[object]
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Seq:
    first: object
    second: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class LetIn:
    rec: bool
    pat: Pattern
    bound: object
    body: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Tuple:
    items: list
    span: Span = _span()
    ty: object = _ty()


@dataclass
class ArrayLit:
    items: list
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Index:
    array: object
    index: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Assign:
    array: object
    index: object
    value: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class While:
    cond: object
    body: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class For:
    var: str
    lo: object
    hi: object
    body: object
    span: Span = _span()
    ty: object = _ty()


@dataclass
class Def:
    """Root-level ``let``/``let rec`` definition (no ``in``)."""
    rec: bool
    pat: Pattern
    bound: object
    span: Span = _span()


Expr = Union[Const, Var, Fun, App, BinOp, UnOp, If, Seq, LetIn, Tuple,
             ArrayLit, Index, Assign, While, For]

EXPR_TYPES = (Const, Var, Fun, App, BinOp, UnOp, If, Seq, LetIn, Tuple,
              ArrayLit, Index, Assign, While, For)


def children(e) -> list:
    """Direct sub-expressions, left to right."""
    if isinstance(e, (Const, Var)):
        return []
    if isinstance(e, Fun):
        return [e.body]
    if isinstance(e, App):
        return [e.fn, *e.args]
    if isinstance(e, BinOp):
        return [e.left, e.right]
    if isinstance(e, UnOp):
        return [e.operand]
    if isinstance(e, If):
        return [e.cond, e.then] + ([e.orelse] if e.orelse is not None else [])
    if isinstance(e, Seq):
        return [e.first, e.second]
    if isinstance(e, LetIn):
        return [e.bound, e.body]
    if isinstance(e, (Tuple, ArrayLit)):
        return list(e.items)
    if isinstance(e, Index):
        return [e.array, e.index]
    if isinstance(e, Assign):
        return [e.array, e.index, e.value]
    if isinstance(e, While):
        return [e.cond, e.body]
    if isinstance(e, For):
        return [e.lo, e.hi, e.body]
    if isinstance(e, Def):
        return [e.bound]
    raise TypeError(f"not an expression: {e!r}")
