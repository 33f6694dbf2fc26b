"""The native runtime: hand-assembled primitives plus the host-side session runtime.

Primitives are encoded with the same :class:`~nml.jit.x86.Asm` as generated
code and linked like any other object, so phrase code reaches them with
plain Rel32 calls.  Printing goes back to Python through ctypes callbacks.

Non-standard register contract of ``nml_rt_alloc(rdi=words, rsi=tag)``: it
writes only rax, rdi, rsi, r14, r15 and the flags.  Every other primitive
follows the generated-code convention (all registers clobbered).
"""
from __future__ import annotations

import ctypes
import struct

from ..errors import TRAP_BOUNDS, TRAP_INVALID, TRAP_OOM, TRAP_STACK, Trap
from ..frontend.printer import show_float
from ..jit.objcode import ObjectCode, Reloc, SymbolDef
from ..jit.x86 import (R8, R9, R12, R13, R14, R15, RAX, RBP, RBX, RCX, RDI,
                       RDX, RSI, RSP, XMM, Asm, Mem)
from . import memory as M
from .linker import GlobalSymbolTable, link_object

# layout of the runtime state block (data section of the runtime object)
ARENA_NEXT, ARENA_LIMIT, SAVED_RSP, STACK_TOP, TRAP_KIND, STACK_LIMIT, ARENA_BASE = (
    0, 8, 16, 24, 32, 40, 48)
STATE_SIZE = 64

HEADER_SHIFT = 10
TAG_TUPLE, TAG_CLOSURE, TAG_STRING, TAG_FLOAT = 0, 247, 252, 253
MAX_ARRAY_WORDS = 1 << 40

DEFAULT_ARENA = 64 << 20
DEFAULT_STACK = 256 << 20
STACK_MARGIN = 1 << 20  # room left for host callbacks running on the native stack

CALLBACKS = ("print_int", "print_float", "print_string", "print_newline")
PRIMITIVES = ("enter", "trap", "stack_overflow", "alloc", "array_make", "array_length",
              "array_get", "array_set", "string_length", "float_of_int", "int_of_float") + CALLBACKS

_CB = ctypes.CFUNCTYPE(ctypes.c_uint64, ctypes.c_uint64)
_ENTER = ctypes.CFUNCTYPE(ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64, ctypes.c_uint64)


def rt(name: str) -> str:
    return f"nml_rt_{name}"


def build_runtime_object(callbacks: dict) -> ObjectCode:
    """Assemble the runtime.  ``callbacks`` maps print primitive -> host address."""
    a = Asm()
    state = rt("state")
    starts = {}

    def fn(name):
        a.align(16)
        starts[rt(name)] = None
        a.label(rt(name))

    # enter(code, arg1, arg2): switch to the native stack and call code(arg1, arg2)
    fn("enter")
    for r in (RBX, RBP, R12, R13, R14, R15):
        a.push(r)
    a.movabs_sym(R14, state)
    a.mov(Mem(R14, disp=SAVED_RSP), RSP)
    a.mov(RSP, Mem(R14, disp=STACK_TOP))
    a.mov(RAX, RDI)
    a.mov(RDI, RSI)
    a.mov(RSI, RDX)
    a.call_reg(RAX)
    a.label(".Lresume")
    a.movabs_sym(R14, state)
    a.mov(RSP, Mem(R14, disp=SAVED_RSP))
    for r in (R15, R14, R13, R12, RBP, RBX):
        a.pop(r)
    a.ret()

    # trap(kind): record the kind, drop every native frame, return from enter
    fn("trap")
    a.movabs_sym(R14, state)
    a.mov(Mem(R14, disp=TRAP_KIND), RDI)
    a.mov32(RAX, 1)
    a.jmp(".Lresume")

    fn("stack_overflow")
    a.mov32(RDI, TRAP_STACK)
    a.jmp_sym(rt("trap"))

    # alloc(words, tag) -> pointer past the header
    fn("alloc")
    a.movabs_sym(R14, state)
    a.mov(RAX, Mem(R14, disp=ARENA_NEXT))
    a.lea(R15, Mem(RAX, RDI, 8, 8))
    a.cmp(R15, Mem(R14, disp=ARENA_LIMIT))
    a.jcc("a", ".Lalloc_oom")
    a.mov(Mem(R14, disp=ARENA_NEXT), R15)
    a.shift("shl", RDI, HEADER_SHIFT)
    a.alu("or", RDI, RSI)
    a.mov(Mem(RAX), RDI)
    a.add(RAX, 8)
    a.ret()
    a.label(".Lalloc_oom")
    a.mov32(RDI, TRAP_OOM)
    a.jmp_sym(rt("trap"))

    # array_make(tagged n, init) -> array block filled with init
    fn("array_make")
    a.mov(RCX, RDI)
    a.shift("sar", RCX, 1)
    a.jcc("s", ".Lmake_invalid")
    a.movabs(R15, MAX_ARRAY_WORDS)
    a.cmp(RCX, R15)
    a.jcc("a", ".Lmake_oom")
    a.movabs_sym(R14, state)
    a.mov(RDX, Mem(R14, disp=ARENA_NEXT))
    a.lea(R8, Mem(RDX, RCX, 8, 8))
    a.cmp(R8, Mem(R14, disp=ARENA_LIMIT))
    a.jcc("a", ".Lmake_oom")
    a.mov(Mem(R14, disp=ARENA_NEXT), R8)
    a.mov(RAX, RCX)
    a.shift("shl", RAX, HEADER_SHIFT)
    a.mov(Mem(RDX), RAX)
    a.lea(RDI, Mem(RDX, disp=8))
    a.mov(R9, RDI)
    a.mov(RAX, RSI)
    a.rep_stosq()
    a.mov(RAX, R9)
    a.ret()
    a.label(".Lmake_invalid")
    a.mov32(RDI, TRAP_INVALID)
    a.jmp_sym(rt("trap"))
    a.label(".Lmake_oom")
    a.mov32(RDI, TRAP_OOM)
    a.jmp_sym(rt("trap"))

    fn("array_length")
    a.mov(RAX, Mem(RDI, disp=-8))
    a.shift("shr", RAX, HEADER_SHIFT - 1)
    a.alu("or", RAX, 1)
    a.ret()

    def bounds_check(label):
        a.mov(RAX, Mem(RDI, disp=-8))
        a.shift("shr", RAX, HEADER_SHIFT - 1)
        a.alu("or", RAX, 1)
        a.cmp(RSI, RAX)
        a.jcc("ae", label)

    fn("array_get")
    bounds_check(".Lget_bounds")
    a.mov(RAX, Mem(RDI, RSI, 4, -4))
    a.ret()
    a.label(".Lget_bounds")
    a.mov32(RDI, TRAP_BOUNDS)
    a.jmp_sym(rt("trap"))

    fn("array_set")
    bounds_check(".Lset_bounds")
    a.mov(Mem(RDI, RSI, 4, -4), RDX)
    a.mov32(RAX, 1)
    a.ret()
    a.label(".Lset_bounds")
    a.mov32(RDI, TRAP_BOUNDS)
    a.jmp_sym(rt("trap"))

    fn("string_length")
    a.mov(RAX, Mem(RDI))
    a.lea(RAX, Mem(RAX, RAX, 1, 1))
    a.ret()

    fn("float_of_int")
    a.shift("sar", RDI, 1)
    a.cvtsi2sd(XMM[15], RDI)
    a.mov32(RDI, 1)
    a.mov32(RSI, TAG_FLOAT)
    a.call_sym(rt("alloc"))
    a.movsd(Mem(RAX), XMM[15])
    a.ret()

    fn("int_of_float")
    a.cvttsd2si(RAX, Mem(RDI))
    a.lea(RAX, Mem(RAX, RAX, 1, 1))
    a.ret()

    # print primitives jump to host callbacks
    for name in CALLBACKS:
        fn(name)
        a.movabs(R14, callbacks[name])
        a.jmp_reg(R14)

    frag = a.assemble()
    relocs = tuple(Reloc("text", off, kind, sym, addend) for off, kind, sym, addend in frag.relocs)
    defined = [SymbolDef(name, "text", frag.labels[name], True) for name in starts]
    defined += [SymbolDef(state, "data", 0, True),
                SymbolDef(rt("arena"), "data", ARENA_NEXT, True),
                SymbolDef(rt("stack_limit"), "data", STACK_LIMIT, True)]
    return ObjectCode(frag.code, bytes(STATE_SIZE), relocs, tuple(defined), (),
                      listing=a.listing())


class HeapArena:
    """View of the bump-allocation state kept in the runtime data block."""

    def __init__(self, state_addr: int, base: int, size: int):
        self.state = state_addr
        self.base_addr = base
        self.size = size

    @property
    def base(self) -> int:
        return self.base_addr

    @property
    def next(self) -> int:
        return M.read_word(self.state + ARENA_NEXT)

    @property
    def limit(self) -> int:
        return M.read_word(self.state + ARENA_LIMIT)

    def used(self) -> int:
        return self.next - self.base


class Runtime:
    """Per-session native runtime: arena, native stack, linked primitives."""

    def __init__(self, table: GlobalSymbolTable, write, arena_size: int = DEFAULT_ARENA,
                 stack_size: int = DEFAULT_STACK):
        self.write = write
        self.table = table
        self._callbacks = {
            "print_int": _CB(self._print_int),
            "print_float": _CB(self._print_float),
            "print_string": _CB(self._print_string),
            "print_newline": _CB(self._print_newline),
        }
        addrs = {k: ctypes.cast(v, ctypes.c_void_p).value for k, v in self._callbacks.items()}
        self.object = build_runtime_object(addrs)
        self.image, _ = link_object(self.object, table)
        self.state = table.lookup(rt("state"))
        self.arena_size = M.page_round(max(arena_size, M.PAGE))
        self.arena_base = M.map_anonymous(self.arena_size, M.PROT_READ | M.PROT_WRITE)
        self.arena = HeapArena(self.state, self.arena_base, self.arena_size)
        self.stack_size = M.page_round(stack_size)
        self.stack_base = M.map_anonymous(self.stack_size, M.PROT_READ | M.PROT_WRITE)
        M.protect(self.stack_base, M.PAGE, M.PROT_NONE)  # guard page
        M.write_word(self.state + ARENA_NEXT, self.arena_base)
        M.write_word(self.state + ARENA_LIMIT, self.arena_base + self.arena_size)
        M.write_word(self.state + ARENA_BASE, self.arena_base)
        M.write_word(self.state + STACK_TOP, self.stack_base + self.stack_size - 64)
        M.write_word(self.state + STACK_LIMIT, self.stack_base + STACK_MARGIN)
        self._enter = _ENTER(table.lookup(rt("enter")))
        self.closed = False

    # host callbacks; they run on the native stack and must not raise
    def _print_int(self, w):
        self.write(str(to_signed(w) >> 1))
        return 1

    def _print_float(self, p):
        self.write(show_float(read_float(p)))
        return 1

    def _print_string(self, p):
        self.write(read_string(p))
        return 1

    def _print_newline(self, _):
        self.write("\n")
        return 1

    def call(self, addr: int, arg1: int = 0, arg2: int = 0) -> int:
        """Run native code at ``addr`` on the native stack.  Traps raise :class:`Trap`."""
        M.write_word(self.state + TRAP_KIND, 0)
        result = self._enter(addr, arg1 & 0xFFFFFFFFFFFFFFFF, arg2 & 0xFFFFFFFFFFFFFFFF)
        kind = M.read_word(self.state + TRAP_KIND)
        if kind:
            raise Trap(kind)
        return result

    def rt_alloc(self, words: int, tag: int) -> int:
        return self.call(self.table.lookup(rt("alloc")), words, tag)

    def close(self) -> None:
        if not self.closed:
            M.unmap(self.arena_base, self.arena_size)
            M.unmap(self.stack_base, self.stack_size)
            self.closed = True


def to_signed(w: int) -> int:
    w &= 0xFFFFFFFFFFFFFFFF
    return w - (1 << 64) if w >> 63 else w


def read_float(p: int) -> float:
    return struct.unpack("<d", M.read(p, 8))[0]


def read_string(p: int) -> str:
    n = M.read_word(p)
    return M.read(p + 8, n).decode("utf-8", errors="replace")


def header(p: int) -> tuple[int, int]:
    """(size in words, tag) of the block at ``p``."""
    h = M.read_word(p - 8)
    return h >> HEADER_SHIFT, h & 0xFF
