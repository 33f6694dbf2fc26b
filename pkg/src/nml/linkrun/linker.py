"""Just-in-time linker: place an object in memory, patch it, publish its symbols."""
from __future__ import annotations

import struct
from dataclasses import dataclass

from ..errors import LinkError
from ..jit.objcode import DATA_SENTINEL, FIELD_WIDTH, ObjectCode, Reloc
from ..jit.x86 import TEXT_SENTINEL
from . import memory as M


class GlobalSymbolTable:
    """Session-wide, append-only map from symbol name to absolute address."""

    def __init__(self):
        self._addr: dict[str, int] = {}

    def define(self, name: str, addr: int) -> None:
        if name in self._addr:
            raise LinkError(f"symbol {name} already defined")
        self._addr[name] = addr

    def lookup(self, name: str) -> int:
        try:
            return self._addr[name]
        except KeyError:
            raise LinkError(f"unresolved symbol {name}") from None

    def get(self, name: str):
        return self._addr.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._addr

    def __len__(self) -> int:
        return len(self._addr)

    def names(self) -> frozenset:
        return frozenset(self._addr)

    def items(self):
        return self._addr.items()


@dataclass
class ExecutableImage:
    """Memory holding one linked object.  ``writable`` -> ``sealed``, never back."""
    text_base: int
    text_length: int
    data_base: int
    data_length: int
    state: str = "writable"
    symbols: dict = None  # name -> address, for every symbol the object defines

    @property
    def sealed(self) -> bool:
        return self.state == "sealed"

    def patch(self, section: str, offset: int, data: bytes) -> None:
        if section == "text" and self.sealed:
            raise LinkError("text of a sealed image is read-only")
        M.write(self.base(section) + offset, data)

    def base(self, section: str) -> int:
        return self.text_base if section == "text" else self.data_base

    def seal(self) -> None:
        if self.sealed:
            raise LinkError("image already sealed")
        if self.text_length:
            M.protect(self.text_base, M.page_round(self.text_length), M.PROT_READ | M.PROT_EXEC)
        self.state = "sealed"


def relocation_value(r: Reloc, section_bases: dict, target: int) -> int:
    if r.kind == "Abs64":
        return (target + r.addend) & 0xFFFFFFFFFFFFFFFF
    disp = target + r.addend - (section_bases[r.section] + r.offset)
    if not -(1 << 31) <= disp < (1 << 31):
        raise LinkError(f"Rel32 displacement to {r.target} out of range ({disp:#x})")
    return disp


def apply_relocation(r: Reloc, section_bases: dict, target: int) -> bytes:
    """The patched field bytes for ``r`` given its target's address."""
    v = relocation_value(r, section_bases, target)
    if r.kind == "Abs64":
        return struct.pack("<Q", v)
    return struct.pack("<i", v)


def read_back_target(r: Reloc, section_bases: dict, field: bytes) -> int:
    """Invert :func:`apply_relocation`: recover the target address from a field."""
    if r.kind == "Abs64":
        return (struct.unpack("<Q", field)[0] - r.addend) & 0xFFFFFFFFFFFFFFFF
    return struct.unpack("<i", field)[0] + section_bases[r.section] + r.offset - r.addend


def link_object(obj: ObjectCode, table: GlobalSymbolTable):
    """Copy, relocate and seal ``obj``; register its global symbols in ``table``."""
    obj.validate()
    local = {}
    missing = sorted({r.target for r in obj.relocs
                      if r.target not in {s.name for s in obj.defined} and r.target not in table})
    if missing:
        raise LinkError("unresolved symbol" + ("s " if len(missing) > 1 else " ") + ", ".join(missing))
    text_base = M.text_pool().carve(len(obj.text)) if obj.text else 0
    data_base = M.data_pool().carve(len(obj.data)) if obj.data else 0
    if obj.text:
        M.protect(text_base, M.page_round(len(obj.text)), M.PROT_READ | M.PROT_WRITE)
    img = ExecutableImage(text_base, len(obj.text), data_base, len(obj.data))
    bases = {"text": text_base, "data": data_base}
    for s in obj.defined:
        local[s.name] = bases[s.section] + s.offset
    img.symbols = dict(local)
    if obj.text:
        img.patch("text", 0, obj.text)
    if obj.data:
        img.patch("data", 0, obj.data)
    for r in obj.relocs:
        target = local[r.target] if r.target in local else table.lookup(r.target)
        img.patch(r.section, r.offset, apply_relocation(r, bases, target))
    img.seal()
    for s in obj.defined:
        if s.global_:
            table.define(s.name, local[s.name])
    return img, table


def _sentinel(r: Reloc) -> bytes:
    return bytes([TEXT_SENTINEL if r.section == "text" else DATA_SENTINEL]) * FIELD_WIDTH[r.kind]


def verify_relocations(obj: ObjectCode, img: ExecutableImage, table: GlobalSymbolTable) -> list:
    """Re-derive every relocation target from the linked bytes.

    Returns a list of problems: a target address that does not match the
    symbol's registered address, or a field still holding its placeholder.
    An empty list means the image is fully and correctly patched.
    """
    bases = {"text": img.text_base, "data": img.data_base}
    problems = []
    for r in obj.relocs:
        field = M.read(bases[r.section] + r.offset, FIELD_WIDTH[r.kind])
        if field == _sentinel(r):
            problems.append(f"placeholder survives at {r.render()}")
            continue
        expected = img.symbols[r.target] if r.target in img.symbols else table.lookup(r.target)
        got = read_back_target(r, bases, field)
        if got != expected:
            problems.append(f"{r.render()}: field yields {got:#x}, symbol is at {expected:#x}")
    return problems
