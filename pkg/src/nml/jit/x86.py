"""x86-64 instruction encoder.

:class:`Asm` collects instructions for one code fragment, producing both the
machine bytes and a GNU ``.intel_syntax noprefix`` listing of the same
instructions.  Jumps to local labels start short and are widened until every
displacement fits, the way GNU as relaxes them.  References to symbols become
relocations whose fields hold the sentinel byte until link time.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import CompilerBug

TEXT_SENTINEL = 0xCC


@dataclass(frozen=True)
class Reg:
    name: str
    num: int
    cls: str  # "i" or "f"

    def __repr__(self):
        return self.name


_GPR = ["rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
        "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15"]
_GPR32 = ["eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
          "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"]
_GPR8 = ["al", "cl", "dl", "bl", "spl", "bpl", "sil", "dil",
         "r8b", "r9b", "r10b", "r11b", "r12b", "r13b", "r14b", "r15b"]

REGS: dict[str, Reg] = {}
for _i, _n in enumerate(_GPR):
    REGS[_n] = Reg(_n, _i, "i")
for _i in range(16):
    REGS[f"xmm{_i}"] = Reg(f"xmm{_i}", _i, "f")
globals().update({n.upper(): r for n, r in REGS.items()})

RAX, RCX, RDX, RBX, RSP, RBP, RSI, RDI = (REGS[n] for n in _GPR[:8])
R8, R9, R10, R11, R12, R13, R14, R15 = (REGS[n] for n in _GPR[8:])
XMM = [REGS[f"xmm{i}"] for i in range(16)]


@dataclass(frozen=True)
class Mem:
    """``[base + index*scale + disp]``, always a qword unless ``size`` says otherwise."""
    base: Reg
    index: Reg | None = None
    scale: int = 1
    disp: int = 0

    def text(self, size: str = "QWORD") -> str:
        s = self.base.name
        if self.index is not None:
            s += f"+{self.index.name}" + (f"*{self.scale}" if self.scale != 1 else "")
        if self.disp > 0:
            s += f"+{self.disp}"
        elif self.disp < 0:
            s += f"-{-self.disp}"
        return f"{size} PTR [{s}]"


CONDS = {"o": 0, "no": 1, "b": 2, "ae": 3, "e": 4, "ne": 5, "be": 6, "a": 7,
         "s": 8, "ns": 9, "p": 10, "np": 11, "l": 12, "ge": 13, "le": 14, "g": 15}
NEGATE = {"e": "ne", "ne": "e", "l": "ge", "ge": "l", "le": "g", "g": "le",
          "b": "ae", "ae": "b", "be": "a", "a": "be", "s": "ns", "ns": "s",
          "o": "no", "no": "o", "p": "np", "np": "p"}

_ALU = {"add": 0, "or": 1, "and": 4, "sub": 5, "xor": 6, "cmp": 7}
_SHIFT = {"shl": 4, "shr": 5, "sar": 7}
_SSE = {"addsd": 0x58, "mulsd": 0x59, "subsd": 0x5C, "divsd": 0x5E}


def fits8(v: int) -> bool:
    return -128 <= v <= 127


def fits32(v: int) -> bool:
    return -(1 << 31) <= v < (1 << 31)


def _imm_text(v: int) -> str:
    return str(v)


def modrm_bytes(reg_field: int, rm, *, w: bool, prefix: bytes = b"", opcode: bytes,
                byte_regs: tuple = (), imm: bytes = b"") -> bytes:
    """Encode ``prefix REX opcode ModRM [SIB] [disp] imm``.

    ``rm`` is a :class:`Reg` or :class:`Mem`.  ``byte_regs`` lists register
    numbers used as 8-bit operands (spl..dil need a bare REX).
    """
    rex = 0x48 if w else 0x40
    need = w
    if reg_field >= 8:
        rex |= 4
        need = True
    if isinstance(rm, Reg):
        if rm.num >= 8:
            rex |= 1
            need = True
        body = bytes([0xC0 | (reg_field & 7) << 3 | (rm.num & 7)])
    else:
        base, index = rm.base, rm.index
        if index is not None:
            if index.num == 4:
                raise CompilerBug("rsp cannot be an index register")
            if index.num >= 8:
                rex |= 2
                need = True
        if base.num >= 8:
            rex |= 1
            need = True
        disp = rm.disp
        if disp == 0 and (base.num & 7) != 5:
            mod, dbytes = 0, b""
        elif fits8(disp):
            mod, dbytes = 1, struct.pack("<b", disp)
        elif fits32(disp):
            mod, dbytes = 2, struct.pack("<i", disp)
        else:
            raise CompilerBug(f"displacement {disp} out of range")
        if index is None and (base.num & 7) != 4:
            body = bytes([mod << 6 | (reg_field & 7) << 3 | (base.num & 7)]) + dbytes
        else:
            ss = {1: 0, 2: 1, 4: 2, 8: 3}.get(rm.scale)
            if ss is None:
                raise CompilerBug(f"scale {rm.scale} is not encodable")
            idx = 4 if index is None else index.num & 7
            body = bytes([mod << 6 | (reg_field & 7) << 3 | 4,
                          ss << 6 | idx << 3 | (base.num & 7)]) + dbytes
    if any(4 <= n <= 7 for n in byte_regs):
        need = True
    out = prefix + (bytes([rex]) if need else b"") + opcode + body + imm
    return out


@dataclass
class _Fixed:
    data: bytes
    relocs: tuple = ()  # (offset in chunk, kind, symbol, addend)


@dataclass
class _Jump:
    cond: str | None  # None for jmp
    label: str
    near: bool = False

    @property
    def size(self) -> int:
        if not self.near:
            return 2
        return 5 if self.cond is None else 6


@dataclass
class _Label:
    name: str


@dataclass
class _Align:
    boundary: int


@dataclass
class Fragment:
    """Assembled bytes with label offsets and relocations."""
    code: bytes
    labels: dict
    relocs: list  # (offset, kind, symbol, addend)


class Asm:
    def __init__(self):
        self.items: list = []
        self.lines: list[str] = []

    # -- plumbing --
    def _put(self, data: bytes, text: str, relocs: tuple = ()):
        self.items.append(_Fixed(data, relocs))
        self.lines.append("\t" + text)

    def label(self, name: str):
        self.items.append(_Label(name))
        self.lines.append(f"{name}:")

    def comment(self, text: str):
        self.lines.append(f"\t# {text}")

    def align(self, boundary: int = 16):
        self.items.append(_Align(boundary))
        self.lines.append(f"\t.p2align {boundary.bit_length() - 1}, {TEXT_SENTINEL:#x}")

    def directive(self, text: str):
        self.lines.append("\t" + text)

    # -- data movement --
    def mov(self, dst, src):
        if isinstance(src, int):
            if isinstance(dst, Reg):
                if fits32(src):
                    self._put(modrm_bytes(0, dst, w=True, opcode=b"\xC7", imm=struct.pack("<i", src)),
                              f"mov {dst.name}, {_imm_text(src)}")
                else:
                    self.movabs(dst, src)
            else:
                if not fits32(src):
                    raise CompilerBug("64-bit immediate store")
                self._put(modrm_bytes(0, dst, w=True, opcode=b"\xC7", imm=struct.pack("<i", src)),
                          f"mov {dst.text()}, {_imm_text(src)}")
        elif isinstance(dst, Reg) and isinstance(src, Reg):
            self._put(modrm_bytes(src.num, dst, w=True, opcode=b"\x89"), f"mov {dst.name}, {src.name}")
        elif isinstance(dst, Reg):
            self._put(modrm_bytes(dst.num, src, w=True, opcode=b"\x8B"), f"mov {dst.name}, {src.text()}")
        else:
            self._put(modrm_bytes(src.num, dst, w=True, opcode=b"\x89"), f"mov {dst.text()}, {src.name}")

    def mov32(self, dst: Reg, imm: int):
        """``mov r32, imm32`` (zero-extends into the full register)."""
        if not 0 <= imm < (1 << 32):
            raise CompilerBug("mov32 immediate out of range")
        data = (b"\x41" if dst.num >= 8 else b"") + bytes([0xB8 + (dst.num & 7)]) + struct.pack("<I", imm)
        self._put(data, f"mov {_GPR32[dst.num]}, {imm}")

    def movabs(self, dst: Reg, imm: int):
        data = bytes([0x49 if dst.num >= 8 else 0x48, 0xB8 + (dst.num & 7)]) + struct.pack("<Q", imm & (2 ** 64 - 1))
        self._put(data, f"movabs {dst.name}, {imm}")

    def movabs_sym(self, dst: Reg, symbol: str, addend: int = 0):
        """Load a symbol's absolute address (Abs64 relocation)."""
        data = bytes([0x49 if dst.num >= 8 else 0x48, 0xB8 + (dst.num & 7)]) + bytes([TEXT_SENTINEL]) * 8
        text = f"movabs {dst.name}, OFFSET FLAT:{symbol}" + (f"+{addend}" if addend > 0 else f"{addend}" if addend else "")
        self._put(data, text, ((2, "Abs64", symbol, addend),))

    def lea(self, dst: Reg, src: Mem):
        self._put(modrm_bytes(dst.num, src, w=True, opcode=b"\x8D"), f"lea {dst.name}, {src.text()[10:]}")

    def movzx_byte(self, dst: Reg, src):
        """``movzx r32, r8`` or ``movzx r32, BYTE PTR [m]``."""
        if isinstance(src, Reg):
            self._put(modrm_bytes(dst.num, src, w=False, opcode=b"\x0F\xB6", byte_regs=(src.num,)),
                      f"movzx {_GPR32[dst.num]}, {_GPR8[src.num]}")
        else:
            self._put(modrm_bytes(dst.num, src, w=False, opcode=b"\x0F\xB6"),
                      f"movzx {_GPR32[dst.num]}, {src.text('BYTE')}")

    def push(self, r: Reg):
        self._put((b"\x41" if r.num >= 8 else b"") + bytes([0x50 + (r.num & 7)]), f"push {r.name}")

    def pop(self, r: Reg):
        self._put((b"\x41" if r.num >= 8 else b"") + bytes([0x58 + (r.num & 7)]), f"pop {r.name}")

    # -- integer arithmetic --
    def alu(self, op: str, dst, src):
        n = _ALU[op]
        if isinstance(src, int):
            if fits8(src):
                self._put(modrm_bytes(n, dst, w=True, opcode=b"\x83", imm=struct.pack("<b", src)),
                          f"{op} {_opnd(dst)}, {src}")
            elif not fits32(src):
                raise CompilerBug(f"{op} immediate {src} out of range")
            elif isinstance(dst, Reg) and dst.num == 0:
                self._put(b"\x48" + bytes([n * 8 + 5]) + struct.pack("<i", src), f"{op} rax, {src}")
            else:
                self._put(modrm_bytes(n, dst, w=True, opcode=b"\x81", imm=struct.pack("<i", src)),
                          f"{op} {_opnd(dst)}, {src}")
        elif isinstance(src, Reg):
            self._put(modrm_bytes(src.num, dst, w=True, opcode=bytes([n * 8 + 1])),
                      f"{op} {_opnd(dst)}, {src.name}")
        else:
            self._put(modrm_bytes(dst.num, src, w=True, opcode=bytes([n * 8 + 3])),
                      f"{op} {dst.name}, {src.text()}")

    def add(self, dst, src):
        self.alu("add", dst, src)

    def sub(self, dst, src):
        self.alu("sub", dst, src)

    def cmp(self, dst, src):
        self.alu("cmp", dst, src)

    def imul(self, dst: Reg, src, imm: int | None = None):
        if imm is None:
            self._put(modrm_bytes(dst.num, src, w=True, opcode=b"\x0F\xAF"),
                      f"imul {dst.name}, {_opnd(src)}")
        elif fits8(imm):
            self._put(modrm_bytes(dst.num, src, w=True, opcode=b"\x6B", imm=struct.pack("<b", imm)),
                      f"imul {dst.name}, {_opnd(src)}, {imm}")
        else:
            self._put(modrm_bytes(dst.num, src, w=True, opcode=b"\x69", imm=struct.pack("<i", imm)),
                      f"imul {dst.name}, {_opnd(src)}, {imm}")

    def neg(self, dst):
        self._put(modrm_bytes(3, dst, w=True, opcode=b"\xF7"), f"neg {_opnd(dst)}")

    def shift(self, op: str, dst, amount: int):
        n = _SHIFT[op]
        if amount == 1:
            self._put(modrm_bytes(n, dst, w=True, opcode=b"\xD1"), f"{op} {_opnd(dst)}, 1")
        else:
            self._put(modrm_bytes(n, dst, w=True, opcode=b"\xC1", imm=bytes([amount & 63])),
                      f"{op} {_opnd(dst)}, {amount}")

    def cqo(self):
        self._put(b"\x48\x99", "cqo")

    def idiv(self, src):
        self._put(modrm_bytes(7, src, w=True, opcode=b"\xF7"), f"idiv {_opnd(src)}")

    def test(self, a: Reg, b: Reg):
        self._put(modrm_bytes(b.num, a, w=True, opcode=b"\x85"), f"test {a.name}, {b.name}")

    def setcc(self, cond: str, dst: Reg):
        self._put(modrm_bytes(0, dst, w=False, opcode=bytes([0x0F, 0x90 + CONDS[cond]]), byte_regs=(dst.num,)),
                  f"set{cond} {_GPR8[dst.num]}")

    def rep_stosq(self):
        self._put(b"\xF3\x48\xAB", "rep stosq")

    # -- SSE2 --
    def movsd(self, dst, src):
        if isinstance(dst, Reg):
            self._put(modrm_bytes(dst.num, src, w=False, prefix=b"\xF2", opcode=b"\x0F\x10"),
                      f"movsd {dst.name}, {_opnd(src)}")
        else:
            self._put(modrm_bytes(src.num, dst, w=False, prefix=b"\xF2", opcode=b"\x0F\x11"),
                      f"movsd {dst.text()}, {src.name}")

    def sse(self, op: str, dst: Reg, src):
        self._put(modrm_bytes(dst.num, src, w=False, prefix=b"\xF2", opcode=bytes([0x0F, _SSE[op]])),
                  f"{op} {dst.name}, {_opnd(src)}")

    def cvtsi2sd(self, dst: Reg, src):
        self._put(modrm_bytes(dst.num, src, w=True, prefix=b"\xF2", opcode=b"\x0F\x2A"),
                  f"cvtsi2sd {dst.name}, {_opnd(src)}")

    def cvttsd2si(self, dst: Reg, src):
        self._put(modrm_bytes(dst.num, src, w=True, prefix=b"\xF2", opcode=b"\x0F\x2C"),
                  f"cvttsd2si {dst.name}, {_opnd(src)}")

    # -- control flow --
    def ret(self):
        self._put(b"\xC3", "ret")

    def jmp(self, label: str):
        self.items.append(_Jump(None, label))
        self.lines.append(f"\tjmp {label}")

    def jcc(self, cond: str, label: str):
        self.items.append(_Jump(cond, label))
        self.lines.append(f"\tj{cond} {label}")

    def call_sym(self, symbol: str):
        self._put(b"\xE8" + bytes([TEXT_SENTINEL]) * 4, f"call {symbol}", ((1, "Rel32", symbol, -4),))

    def jmp_sym(self, symbol: str):
        self._put(b"\xE9" + bytes([TEXT_SENTINEL]) * 4, f"jmp {symbol}", ((1, "Rel32", symbol, -4),))

    def jcc_sym(self, cond: str, symbol: str):
        self._put(bytes([0x0F, 0x80 + CONDS[cond]]) + bytes([TEXT_SENTINEL]) * 4, f"j{cond} {symbol}",
                  ((2, "Rel32", symbol, -4),))

    def call_mem(self, src: Mem):
        self._put(modrm_bytes(2, src, w=False, opcode=b"\xFF"), f"call {src.text()}")

    def call_reg(self, r: Reg):
        self._put(modrm_bytes(2, r, w=False, opcode=b"\xFF"), f"call {r.name}")

    def jmp_reg(self, r: Reg):
        self._put(modrm_bytes(4, r, w=False, opcode=b"\xFF"), f"jmp {r.name}")

    # -- assembly --
    def assemble(self) -> Fragment:
        """Relax jumps and produce bytes, label offsets and relocations."""
        jumps = [it for it in self.items if isinstance(it, _Jump)]
        while True:
            labels = self._layout()
            changed = False
            pos = 0
            for it in self.items:
                pos = _advance(it, pos)
                if isinstance(it, _Jump) and not it.near:
                    if it.label not in labels:
                        raise CompilerBug(f"undefined label {it.label}")
                    if not fits8(labels[it.label] - pos):
                        it.near = True
                        changed = True
            if not changed:
                break
        del jumps
        out = bytearray()
        relocs = []
        for it in self.items:
            if isinstance(it, _Fixed):
                for off, kind, sym, addend in it.relocs:
                    relocs.append((len(out) + off, kind, sym, addend))
                out += it.data
            elif isinstance(it, _Jump):
                end = len(out) + it.size
                disp = labels[it.label] - end
                if it.cond is None:
                    out += (b"\xE9" + struct.pack("<i", disp)) if it.near else (b"\xEB" + struct.pack("<b", disp))
                elif it.near:
                    out += bytes([0x0F, 0x80 + CONDS[it.cond]]) + struct.pack("<i", disp)
                else:
                    out += bytes([0x70 + CONDS[it.cond]]) + struct.pack("<b", disp)
            elif isinstance(it, _Align):
                while len(out) % it.boundary:
                    out.append(TEXT_SENTINEL)
        return Fragment(bytes(out), labels, relocs)

    def _layout(self) -> dict:
        labels = {}
        pos = 0
        for it in self.items:
            if isinstance(it, _Label):
                if it.name in labels:
                    raise CompilerBug(f"duplicate label {it.name}")
                labels[it.name] = pos
            pos = _advance(it, pos)
        return labels

    def listing(self) -> str:
        return "\n".join(self.lines) + "\n"


def _advance(it, pos: int) -> int:
    if isinstance(it, _Fixed):
        return pos + len(it.data)
    if isinstance(it, _Jump):
        return pos + it.size
    if isinstance(it, _Align):
        return pos + (-pos) % it.boundary
    return pos


def _opnd(x) -> str:
    return x.name if isinstance(x, Reg) else x.text()
