"""Mach: a control-flow graph of x86-flavoured instructions over virtual registers.

One :class:`Instr` shape covers every operation; ``d`` holds definitions,
``s`` uses and ``a`` the static operand (constant, symbol, condition, ...).
After register allocation the same structures hold physical registers and
:class:`Slot` frame locations.

Ops and their ``a``::

    getargs  d=params(+env)             a=has_env
    move     d=(x,) s=(y,)
    const    d=(x,)                     a=int
    sym      d=(x,)                     a=symbol (absolute address)
    load     d=(x,) s=(base[, index])   a=Addr(scale, disp, chunk)
    store    s=(v, base[, index])       a=Addr
    lea      d=(x,) s=(base[, index])   a=Addr
    iop      d=(x,) s=(y[, z])          a=(op, imm or None)    add sub mul and or xor
    shift    d=(x,) s=(y,)              a=(op, count)          shl shr sar
    cmpset   d=(x,) s=(y[, z])          a=(cond, imm or None)  tagged boolean
    divmod   d=(x,) s=(y, z)            a="div" | "mod"
    fop      d=(f,) s=(g, h)            a=addsd subsd mulsd divsd
    itof     d=(f,) s=(x,)
    ftoi     d=(x,) s=(f,)
    alloc    d=(x,)                     a=((offset, words, tag), ...)
    call     d=(x,) s=args(+env)        a=(symbol, has_env)
    callind  d=(x,) s=(closure, arg)
    extcall  d=(x,) s=args              a=symbol

Terminators::

    jmp      a=target
    cbr      s=(y[, z])                 a=(cond, imm, if_true, if_false)
    ret      s=(x,)
    trap                                a=kind
"""
from __future__ import annotations

from dataclasses import dataclass, field

INT, FLT = "i", "f"

CLOBBERING = frozenset({"call", "callind", "extcall"})
TERMINATORS = frozenset({"jmp", "cbr", "ret", "trap"})


@dataclass(frozen=True)
class VReg:
    id: int
    cls: str = INT

    def __repr__(self):
        return f"{'v' if self.cls == INT else 'f'}{self.id}"


@dataclass(frozen=True)
class Slot:
    """Spill slot ``index`` of the current frame."""
    index: int
    cls: str = INT

    def __repr__(self):
        return f"s{self.index}"


@dataclass(frozen=True)
class Addr:
    scale: int = 1
    disp: int = 0
    chunk: str = "word64"

    def __repr__(self):
        out = f"*{self.scale}" if self.scale != 1 else ""
        if self.disp:
            out += f"{self.disp:+d}"
        if self.chunk != "word64":
            out += f" {self.chunk}"
        return out


class Instr:
    __slots__ = ("op", "d", "s", "a")

    def __init__(self, op: str, d=(), s=(), a=None):
        self.op = op
        self.d = tuple(d)
        self.s = tuple(s)
        self.a = a

    def __repr__(self):
        return show_instr(self)

    def replace(self, d=None, s=None) -> "Instr":
        return Instr(self.op, self.d if d is None else d, self.s if s is None else s, self.a)

    def successors(self) -> tuple:
        if self.op == "jmp":
            return (self.a,)
        if self.op == "cbr":
            return (self.a[2], self.a[3])
        return ()


@dataclass
class Block:
    label: int
    body: list = field(default_factory=list)
    term: Instr | None = None

    def instrs(self):
        yield from self.body
        if self.term is not None:
            yield self.term


@dataclass
class MachFn:
    name: str
    blocks: dict  # label -> Block
    order: list  # layout order of block labels; order[0] is the entry
    global_: bool = False
    frame_slots: int = 0

    def layout(self):
        return [self.blocks[b] for b in self.order]

    def successors(self, label: int) -> tuple:
        return self.blocks[label].term.successors()

    def validate(self):
        for b in self.layout():
            if b.term is None or b.term.op not in TERMINATORS:
                raise ValueError(f"{self.name}: block L{b.label} lacks a terminator")
            if any(i.op in TERMINATORS for i in b.body):
                raise ValueError(f"{self.name}: terminator inside L{b.label}")
            for t in b.term.successors():
                if t not in self.blocks:
                    raise ValueError(f"{self.name}: branch to missing L{t}")
        classes: dict = {}
        for b in self.layout():
            for i in b.instrs():
                for v in i.d + i.s:
                    if isinstance(v, VReg) and classes.setdefault(v.id, v.cls) != v.cls:
                        raise ValueError(f"{self.name}: {v} used with two classes")


def show_loc(x) -> str:
    return repr(x)


def _addr(i: Instr, regs) -> str:
    base = show_loc(regs[0])
    idx = f"+{show_loc(regs[1])}" if len(regs) > 1 else ""
    return f"[{base}{idx}{i.a!r}]"


def show_instr(i: Instr) -> str:
    op, d, s, a = i.op, i.d, i.s, i.a
    ds = ", ".join(map(show_loc, d))
    ss = ", ".join(map(show_loc, s))
    if op == "getargs":
        return f"{ds} <- args" + (" +env" if a else "")
    if op == "move":
        return f"{ds} <- {ss}"
    if op == "const":
        return f"{ds} <- {a}"
    if op == "sym":
        return f'{ds} <- "{a}"'
    if op == "load":
        return f"{ds} <- load {_addr(i, s)}"
    if op == "store":
        return f"store {_addr(i, s[1:])} <- {show_loc(s[0])}"
    if op == "lea":
        return f"{ds} <- lea {_addr(i, s)}"
    if op in ("iop", "shift", "cmpset"):
        extra = "" if a[1] is None else (", " if s else "") + str(a[1])
        return f"{ds} <- {op}.{a[0]} {ss}{extra}"
    if op in ("divmod", "fop"):
        return f"{ds} <- {a} {ss}"
    if op in ("itof", "ftoi"):
        return f"{ds} <- {op} {ss}"
    if op == "alloc":
        parts = " ".join(f"{w}:{t}@{o}" for o, w, t in a)
        return f"{ds} <- alloc {parts}"
    if op == "call":
        env = " +env" if a[1] else ""
        return f'{ds} <- call "{a[0]}" ({ss}){env}'
    if op == "callind":
        return f"{ds} <- callind {ss}"
    if op == "extcall":
        return f'{ds} <- extcall "{a}" ({ss})'
    if op == "jmp":
        return f"jmp L{a}"
    if op == "cbr":
        rhs = show_loc(s[1]) if len(s) > 1 else str(a[1])
        return f"if {show_loc(s[0])} {a[0]} {rhs} goto L{a[2]} else L{a[3]}"
    if op == "ret":
        return f"ret {ss}"
    if op == "trap":
        return f"trap {a}"
    return f"{op} d=({ds}) s=({ss}) {a!r}"


def dump_mach(f: MachFn) -> str:
    out = [f'function "{f.name}"' + (f" frame={f.frame_slots}" if f.frame_slots else "")]
    for b in f.layout():
        out.append(f"L{b.label}:")
        out.extend(f"  {show_instr(i)}" for i in b.instrs())
    return "\n".join(out)
