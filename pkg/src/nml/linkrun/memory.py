"""Raw memory for generated code: mmap/mprotect through libc."""
from __future__ import annotations

import ctypes
import mmap as _mmap
import os

from ..errors import LinkError

PAGE = _mmap.PAGESIZE
PROT_NONE, PROT_READ, PROT_WRITE, PROT_EXEC = 0, 1, 2, 4
MAP_PRIVATE, MAP_ANONYMOUS, MAP_NORESERVE = 0x02, 0x20, 0x4000

_libc = ctypes.CDLL(None, use_errno=True)
_libc.mmap.restype = ctypes.c_void_p
_libc.mmap.argtypes = [ctypes.c_void_p, ctypes.c_size_t, ctypes.c_int, ctypes.c_int,
                       ctypes.c_int, ctypes.c_long]
_libc.mprotect.restype = ctypes.c_int
_libc.mprotect.argtypes = [ctypes.c_void_p, ctypes.c_size_t, ctypes.c_int]
_libc.munmap.restype = ctypes.c_int
_libc.munmap.argtypes = [ctypes.c_void_p, ctypes.c_size_t]

_MAP_FAILED = ctypes.c_void_p(-1).value


def page_round(n: int) -> int:
    return (n + PAGE - 1) // PAGE * PAGE


def map_anonymous(size: int, prot: int) -> int:
    addr = _libc.mmap(None, size, prot, MAP_PRIVATE | MAP_ANONYMOUS | MAP_NORESERVE, -1, 0)
    if addr is None or addr == _MAP_FAILED:
        raise LinkError(f"mmap of {size} bytes failed: {os.strerror(ctypes.get_errno())}")
    return addr


def protect(addr: int, size: int, prot: int) -> None:
    if _libc.mprotect(addr, size, prot) != 0:
        raise LinkError(f"mprotect failed: {os.strerror(ctypes.get_errno())}")


def unmap(addr: int, size: int) -> None:
    _libc.munmap(addr, size)


def write(addr: int, data: bytes) -> None:
    ctypes.memmove(addr, data, len(data))


def read(addr: int, n: int) -> bytes:
    return ctypes.string_at(addr, n)


def read_word(addr: int) -> int:
    return ctypes.c_uint64.from_address(addr).value


def write_word(addr: int, value: int) -> None:
    ctypes.c_uint64.from_address(addr).value = value & 0xFFFFFFFFFFFFFFFF


class RegionPool:
    """A reserved address range handed out in page-aligned pieces.

    Pieces come from one contiguous reservation, so any two of them are
    within 32-bit displacement range of each other.
    """

    def __init__(self, size: int, prot: int):
        self.size = page_round(size)
        self.prot = prot
        self.base = map_anonymous(self.size, prot)
        self.next = self.base

    def carve(self, n: int) -> int:
        n = page_round(max(n, 1))
        if self.next + n > self.base + self.size:
            raise LinkError("code memory pool exhausted")
        addr = self.next
        self.next += n
        return addr

    def release(self) -> None:
        if self.base:
            unmap(self.base, self.size)
            self.base = 0


_text_pool: RegionPool | None = None
_data_pool: RegionPool | None = None

TEXT_POOL_SIZE = 1 << 30
DATA_POOL_SIZE = 1 << 30


def text_pool() -> RegionPool:
    """Process-wide text reservation (inaccessible until a piece is carved)."""
    global _text_pool
    if _text_pool is None:
        _text_pool = RegionPool(TEXT_POOL_SIZE, PROT_NONE)
    return _text_pool


def data_pool() -> RegionPool:
    global _data_pool
    if _data_pool is None:
        _data_pool = RegionPool(DATA_POOL_SIZE, PROT_READ | PROT_WRITE)
    return _data_pool
