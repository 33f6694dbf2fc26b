"""Just-in-time emitter: linear code and data items -> in-memory object code.

Frame layout (``rsp`` after the prologue)::

    [rsp+0], [rsp+8], [rsp+16]   save area for alloc/divmod sequences
    [rsp+24+8k]                  spill slot k

Frame sizes are 8 mod 16 so calls happen on a 16-byte aligned stack.
"""
from __future__ import annotations

import struct

from ..errors import CompilerBug
from ..nativegen.cmm import FloatLit, GlobalSlot, StringLit
from ..nativegen.linearize import LinearFn
from ..nativegen.mach import Instr, Slot
from .objcode import ObjectCode, Reloc, SymbolDef
from .x86 import (R8, R9, R10, R14, R15, RAX, RCX, RDI, RDX, RSI, RSP, XMM,
                  Asm, Mem, Reg, fits32)

ARG_REGS = (RDI, RSI, RDX, RCX, R8, R9)
ENV_REG = R10
SAVE_AREA = 24
HEADER_SHIFT = 10
TAG_STRING = 252

_ALU = {"add": "add", "sub": "sub", "and": "and", "or": "or", "xor": "xor"}
_COMMUTATIVE = {"add", "and", "or", "xor", "mul"}


def rt(name: str) -> str:
    return f"nml_rt_{name}"


def slot_mem(s: Slot) -> Mem:
    return Mem(RSP, disp=SAVE_AREA + 8 * s.index)


def _loc(x):
    return slot_mem(x) if isinstance(x, Slot) else x


def _is_float(x) -> bool:
    return x.cls == "f"


class FunctionEmitter:
    def __init__(self, a: Asm, f: LinearFn, tag: str):
        self.a = a
        self.f = f
        self.tag = tag
        self.frame = f.frame_size

    def block(self, label) -> str:
        return f".L{self.tag}.{label}"

    # -- moves --
    def move(self, d, s, tmp: Reg = R14):
        if d == s:
            return
        a = self.a
        dm, sm = _loc(d), _loc(s)
        both_mem = isinstance(dm, Mem) and isinstance(sm, Mem)
        if _is_float(d) or _is_float(s):
            if both_mem:
                a.movsd(XMM[15], sm)
                a.movsd(dm, XMM[15])
            else:
                a.movsd(dm, sm)
        elif both_mem:
            a.mov(tmp, sm)
            a.mov(dm, tmp)
        else:
            a.mov(dm, sm)

    def parallel_move(self, moves):
        moves = [(d, s) for d, s in moves if d != s]
        while moves:
            sources = {s for _, s in moves}
            for k, (d, s) in enumerate(moves):
                if d not in sources:
                    self.move(d, s, tmp=R15)
                    del moves[k]
                    break
            else:
                d, _ = moves[0]
                self.move(R14, d, tmp=R15)
                moves = [(dd, R14 if ss == d else ss) for dd, ss in moves]

    # -- function --
    def emit(self):
        a, f = self.a, self.f
        a.align(16)
        a.label(f.name)
        a.comment(f"{f.name}: frame {self.frame} bytes, {f.frame_slots} spill slots")
        a.sub(RSP, self.frame)
        a.movabs_sym(R14, rt("stack_limit"))
        a.cmp(RSP, Mem(R14))
        a.jcc_sym("b", rt("stack_overflow"))
        for ins in f.instrs:
            self.instr(ins)

    def instr(self, i: Instr):
        getattr(self, "op_" + i.op)(i)

    def op_label(self, i):
        self.a.label(self.block(i.a))

    def op_jmp(self, i):
        self.a.jmp(self.block(i.a))

    def op_condjump(self, i):
        cond, imm, target = i.a
        self.a.cmp(i.s[0], imm if imm is not None else i.s[1])
        self.a.jcc(cond, self.block(target))

    def op_ret(self, i):
        self.move(RAX, i.s[0])
        self.a.add(RSP, self.frame)
        self.a.ret()

    def op_trap(self, i):
        self.a.mov32(RDI, i.a)
        self.a.call_sym(rt("trap"))

    def op_getargs(self, i):
        srcs = list(ARG_REGS[:len(i.d) - (1 if i.a else 0)])
        if i.a:
            srcs.append(ENV_REG)
        if len(srcs) != len(i.d):
            raise CompilerBug(f"{self.f.name}: too many parameters")
        self.parallel_move(list(zip(i.d, srcs)))

    def op_move(self, i):
        self.move(i.d[0], i.s[0])

    def op_const(self, i):
        d, v = _loc(i.d[0]), i.a
        if isinstance(d, Mem) and not fits32(v):
            self.a.mov(R14, v)
            self.a.mov(d, R14)
        else:
            self.a.mov(d, v)

    def op_sym(self, i):
        self.a.movabs_sym(i.d[0], i.a)

    def _mem(self, regs, addr) -> Mem:
        index = regs[1] if len(regs) > 1 else None
        return Mem(regs[0], index, addr.scale, addr.disp)

    def op_load(self, i):
        m = self._mem(i.s, i.a)
        d = i.d[0]
        if i.a.chunk == "float64":
            self.a.movsd(d, m)
        elif i.a.chunk == "byte":
            self.a.movzx_byte(d, m)
        else:
            self.a.mov(d, m)

    def op_store(self, i):
        m = self._mem(i.s[1:], i.a)
        if i.a.chunk == "float64":
            self.a.movsd(m, i.s[0])
        else:
            self.a.mov(m, i.s[0])

    def op_lea(self, i):
        self.a.lea(i.d[0], self._mem(i.s, i.a))

    def op_iop(self, i):
        a = self.a
        op, imm = i.a
        d = i.d[0]
        if imm is not None:
            src = i.s[0]
            if op == "mul":
                a.imul(d, src, imm)
                return
            if d != src:
                a.mov(d, src)
            a.alu(_ALU[op], d, imm)
            return
        x, y = i.s
        if d == y and d != x:
            if op in _COMMUTATIVE:
                x, y = y, x
            else:  # d = x - d
                a.neg(d)
                a.add(d, x)
                return
        if d != x:
            a.mov(d, x)
        if op == "mul":
            a.imul(d, y)
        else:
            a.alu(_ALU[op], d, y)

    def op_shift(self, i):
        op, count = i.a
        d, s = i.d[0], i.s[0]
        if d != s:
            self.a.mov(d, s)
        self.a.shift(op, d, count)

    def op_cmpset(self, i):
        cond, imm = i.a
        d = i.d[0]
        self.a.cmp(i.s[0], imm if imm is not None else i.s[1])
        self.a.setcc(cond, d)
        self.a.movzx_byte(d, d)
        self.a.lea(d, Mem(d, d, 1, 1))

    def op_divmod(self, i):
        a = self.a
        x, y = i.s
        a.mov(Mem(RSP), RAX)
        a.mov(Mem(RSP, disp=8), RDX)
        a.mov(R15, y)
        a.mov(RAX, x)
        a.cqo()
        a.idiv(R15)
        a.mov(R14, RAX if i.a == "div" else RDX)
        a.mov(RAX, Mem(RSP))
        a.mov(RDX, Mem(RSP, disp=8))
        self.move(i.d[0], R14)

    def op_fop(self, i):
        a = self.a
        d = i.d[0]
        x, y = i.s
        y = _loc(y)
        if d == y and d != x:
            if i.a in ("addsd", "mulsd"):
                x, y = y, _loc(x)
            else:
                a.movsd(XMM[15], _loc(x))
                a.sse(i.a, XMM[15], y)
                a.movsd(d, XMM[15])
                return
        if d != x:
            a.movsd(d, _loc(x))
        a.sse(i.a, d, y)

    def op_itof(self, i):
        self.a.cvtsi2sd(i.d[0], i.s[0])

    def op_ftoi(self, i):
        self.a.cvttsd2si(i.d[0], i.s[0])

    def op_alloc(self, i):
        a = self.a
        parts = i.a
        total = sum(w + 1 for _, w, _ in parts)
        a.mov(Mem(RSP), RAX)
        a.mov(Mem(RSP, disp=8), RDI)
        a.mov(Mem(RSP, disp=16), RSI)
        a.mov32(RDI, total - 1)
        a.mov32(RSI, parts[0][2])
        a.call_sym(rt("alloc"))
        a.mov(R14, RAX)
        if len(parts) > 1:
            for off, w, tag in parts:
                a.mov(Mem(R14, disp=off - 8), w << HEADER_SHIFT | tag)
        a.mov(RAX, Mem(RSP))
        a.mov(RDI, Mem(RSP, disp=8))
        a.mov(RSI, Mem(RSP, disp=16))
        self.move(i.d[0], R14)

    def op_call(self, i):
        symbol, has_env = i.a
        args = i.s[:-1] if has_env else i.s
        if len(args) > len(ARG_REGS):
            raise CompilerBug(f"call to {symbol} with {len(args)} arguments")
        moves = list(zip(ARG_REGS, args))
        if has_env:
            moves.append((ENV_REG, i.s[-1]))
        self.parallel_move(moves)
        self.a.call_sym(symbol)
        self.move(i.d[0], RAX)

    def op_callind(self, i):
        clo, arg = i.s
        self.parallel_move([(ENV_REG, clo), (RDI, arg)])
        self.a.call_mem(Mem(ENV_REG))
        self.move(i.d[0], RAX)

    def op_extcall(self, i):
        self.parallel_move(list(zip(ARG_REGS, i.s)))
        self.a.call_sym(i.a)
        self.move(i.d[0], RAX)


# -- data --

def _string_block(s: str) -> tuple[bytes, int]:
    """Header, length word and padded bytes; returns (bytes, label offset)."""
    raw = s.encode("utf-8")
    words = 1 + (len(raw) + 7) // 8
    body = struct.pack("<Q", len(raw)) + raw + bytes(-len(raw) % 8)
    return struct.pack("<Q", words << HEADER_SHIFT | TAG_STRING) + body, 8


def layout_data(items) -> tuple[bytes, list, list]:
    """Data bytes, symbol definitions and listing lines for ``items``."""
    out = bytearray()
    syms, lines = [], ["\t.data"]
    for d in items:
        lines.append("\t.p2align 3")
        if isinstance(d, FloatLit):
            syms.append(SymbolDef(d.label, "data", len(out), False))
            bits = struct.pack("<d", d.value)
            lines += [f"{d.label}:", f"\t.quad {struct.unpack('<Q', bits)[0]:#018x}  # {d.value!r}"]
            out += bits
        elif isinstance(d, StringLit):
            block, off = _string_block(d.value)
            hdr = struct.unpack("<Q", block[:8])[0]
            lines.append(f"\t.quad {hdr:#x}  # string header")
            syms.append(SymbolDef(d.label, "data", len(out) + off, False))
            lines += [f"{d.label}:", f"\t.quad {len(d.value.encode('utf-8'))}",
                      f"\t.ascii {_ascii(d.value)}", "\t.p2align 3"]
            out += block
        elif isinstance(d, GlobalSlot):
            syms.append(SymbolDef(d.label, "data", len(out), True))
            lines += [f"{d.label}:", f"\t.quad {d.init}"]
            out += struct.pack("<q", d.init)
        else:
            raise CompilerBug(f"unknown data item {d!r}")
    return bytes(out), syms, lines


def _ascii(s: str) -> str:
    out = []
    for b in s.encode("utf-8"):
        c = chr(b)
        if c in '"\\':
            out.append("\\" + c)
        elif 32 <= b < 127:
            out.append(c)
        else:
            out.append(f"\\{b:03o}")
    return '"' + "".join(out) + '"'


def _assemble(fns: list) -> tuple[Asm, list]:
    a = Asm()
    a.directive(".intel_syntax noprefix")
    a.directive(".text")
    for k, f in enumerate(fns):
        FunctionEmitter(a, f, str(k)).emit()
    return a, fns


def emit_object(fns: list, data: list, phrase_id: int | None = None) -> ObjectCode:
    """Encode ``fns`` and ``data`` into an :class:`ObjectCode`."""
    a, _ = _assemble(fns)
    frag = a.assemble()
    dbytes, dsyms, dlines = layout_data(data)
    # every function is exported: later phrases may call known functions directly
    defined = [SymbolDef(f.name, "text", frag.labels[f.name], True) for f in fns] + dsyms
    relocs = tuple(Reloc("text", off, kind, sym, addend) for off, kind, sym, addend in frag.relocs)
    names = {s.name for s in defined}
    referenced = tuple(sorted({r.target for r in relocs} - names))
    listing = a.listing() + "\n".join(dlines) + "\n"
    obj = ObjectCode(frag.code, dbytes, relocs, tuple(defined), referenced, listing)
    obj.validate()
    return obj


def emit_assembly_text(fns: list, data: list) -> str:
    a, _ = _assemble(fns)
    _, _, dlines = layout_data(data)
    return a.listing() + "\n".join(dlines) + "\n"


def encode_instruction(i: Instr, frame_slots: int = 0) -> tuple[bytes, list]:
    """Bytes and pending relocations of one linear instruction on its own."""
    f = LinearFn("_", [], frame_slots)
    a = Asm()
    em = FunctionEmitter(a, f, "x")
    if i.op in ("jmp", "condjump"):
        a.label(em.block(i.a if i.op == "jmp" else i.a[2]))
    em.instr(i)
    frag = a.assemble()
    return frag.code, frag.relocs
