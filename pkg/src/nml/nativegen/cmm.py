"""A small C-- dialect: machine words and floats, memory, allocation, calls.

Expressions are evaluated with operands right to left, matching the
bytecode backend.  Every expression has machine type ``"w"`` (word) or
``"f"`` (unboxed float).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend.printer import show_float, show_string

WORD, FLOAT = "w", "f"
CHUNKS = ("word64", "float64", "byte")

INT_OPS = {"add", "sub", "mul", "div", "mod", "and", "or", "xor", "lsl", "lsr", "asr"}
FLOAT_OPS = {"addf", "subf", "mulf", "divf"}


@dataclass(frozen=True)
class CConst:
    value: int


@dataclass(frozen=True)
class CConstF:
    value: float


@dataclass(frozen=True)
class CSym:
    name: str


@dataclass(frozen=True)
class CVar:
    id: int
    ty: str = WORD


@dataclass(frozen=True)
class CLet:
    id: int
    bound: object
    body: object
    ty: str = WORD


@dataclass(frozen=True)
class CAssign:
    id: int
    value: object


@dataclass(frozen=True)
class CLoad:
    addr: object
    chunk: str = "word64"


@dataclass(frozen=True)
class CStore:
    addr: object
    chunk: str
    value: object


@dataclass(frozen=True)
class COp:
    """Integer, float or conversion operator.

    ``cmp`` compares two words with condition ``param`` (x86 condition
    names: l, le, e, ae, ...) and yields a tagged boolean.
    """
    op: str
    args: tuple
    param: object = None


@dataclass(frozen=True)
class CAlloc:
    tag: int
    fields: tuple


@dataclass(frozen=True)
class CCall:
    """Direct call of a generated function; ``env`` goes in the closure register."""
    symbol: str
    args: tuple
    env: object = None


@dataclass(frozen=True)
class CCallInd:
    """Unary application of a closure."""
    closure: object
    arg: object


@dataclass(frozen=True)
class CExtCall:
    """Call of a runtime primitive."""
    symbol: str
    args: tuple


@dataclass(frozen=True)
class CIf:
    cond: object
    then: object
    orelse: object


@dataclass(frozen=True)
class CLoop:
    """``test_first``: while-loop; otherwise the body runs once before the test."""
    cond: object
    body: object
    test_first: bool = True


@dataclass(frozen=True)
class CSeq:
    first: object
    second: object


@dataclass(frozen=True)
class CTrap:
    kind: int


@dataclass
class CmmFunction:
    name: str
    params: tuple  # word variables
    env: int | None
    body: object
    global_: bool = False


@dataclass(frozen=True)
class FloatLit:
    label: str
    value: float


@dataclass(frozen=True)
class StringLit:
    """Label points at the length word; a block header precedes it."""
    label: str
    value: str


@dataclass(frozen=True)
class GlobalSlot:
    label: str
    init: int = 1


@dataclass
class CmmProgram:
    functions: list = field(default_factory=list)
    data: list = field(default_factory=list)
    entry: str = ""


def ctype(e, env: dict | None = None) -> str:
    """Machine type of an expression; ``env`` maps variable ids to types."""
    t = type(e)
    if t is CConstF:
        return FLOAT
    if t is CVar:
        return e.ty
    if t is CLoad:
        return FLOAT if e.chunk == "float64" else WORD
    if t is COp:
        return FLOAT if e.op in FLOAT_OPS or e.op == "floatofint" else WORD
    if t is CLet:
        return ctype(e.body, env)
    if t is CIf:
        return ctype(e.then, env)
    if t is CSeq:
        return ctype(e.second, env)
    return WORD


def show(e) -> str:
    t = type(e)
    if t is CConst:
        return str(e.value)
    if t is CConstF:
        return show_float(e.value)
    if t is CSym:
        return f'"{e.name}"'
    if t is CVar:
        return f"{'f' if e.ty == FLOAT else 'v'}{e.id}"
    if t is CLet:
        return f"(let {'f' if e.ty == FLOAT else 'v'}{e.id} {show(e.bound)} {show(e.body)})"
    if t is CAssign:
        return f"(assign v{e.id} {show(e.value)})"
    if t is CLoad:
        return f"(load {e.chunk} {show(e.addr)})"
    if t is CStore:
        return f"(store {e.chunk} {show(e.addr)} {show(e.value)})"
    if t is COp:
        head = e.op if e.param is None else f"{e.op}.{e.param}"
        return f"({head} " + " ".join(show(a) for a in e.args) + ")"
    if t is CAlloc:
        return f"(alloc {e.tag}" + "".join(" " + show(x) for x in e.fields) + ")"
    if t is CCall:
        env = f" env={show(e.env)}" if e.env is not None else ""
        return f'(call "{e.symbol}"{env}' + "".join(" " + show(a) for a in e.args) + ")"
    if t is CCallInd:
        return f"(apply {show(e.closure)} {show(e.arg)})"
    if t is CExtCall:
        return f'(extcall "{e.symbol}"' + "".join(" " + show(a) for a in e.args) + ")"
    if t is CIf:
        return f"(if {show(e.cond)} {show(e.then)} {show(e.orelse)})"
    if t is CLoop:
        kw = "while" if e.test_first else "dowhile"
        return f"({kw} {show(e.cond)} {show(e.body)})"
    if t is CSeq:
        return f"(seq {show(e.first)} {show(e.second)})"
    if t is CTrap:
        return f"(trap {e.kind})"
    raise TypeError(e)


def dump(p: CmmProgram) -> str:
    out = []
    for d in p.data:
        if isinstance(d, FloatLit):
            out.append(f"(data {d.label} float {show_float(d.value)})")
        elif isinstance(d, StringLit):
            out.append(f"(data {d.label} string {show_string(d.value)})")
        else:
            out.append(f"(data {d.label} word {d.init})")
    for f in p.functions:
        ps = " ".join(f"v{i}" for i in f.params)
        env = f" env=v{f.env}" if f.env is not None else ""
        out.append(f'(function "{f.name}" ({ps}){env}\n  {show(f.body)})')
    return "\n".join(out)
