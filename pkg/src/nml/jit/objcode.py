"""In-memory object files: sections, relocations and symbol definitions."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import CompilerBug

DATA_SENTINEL = 0x00
FIELD_WIDTH = {"Abs64": 8, "Rel32": 4}


@dataclass(frozen=True)
class Reloc:
    section: str  # "text" | "data"
    offset: int
    kind: str  # "Abs64" | "Rel32"
    target: str
    addend: int = 0

    def render(self) -> str:
        return f"{self.kind} {self.section}+{self.offset:#x} -> {self.target} {self.addend}"


@dataclass(frozen=True)
class SymbolDef:
    name: str
    section: str
    offset: int
    global_: bool = False

    def render(self) -> str:
        return f"{self.name} {self.section}+{self.offset:#x} {'global' if self.global_ else 'local'}"


@dataclass(frozen=True)
class ObjectCode:
    text: bytes
    data: bytes
    relocs: tuple = ()
    defined: tuple = ()
    referenced: tuple = ()
    listing: str = field(default="", compare=False)

    def symbol(self, name: str) -> SymbolDef:
        for s in self.defined:
            if s.name == name:
                return s
        raise KeyError(name)

    def validate(self) -> None:
        sizes = {"text": len(self.text), "data": len(self.data)}
        names = [s.name for s in self.defined]
        if len(set(names)) != len(names):
            raise CompilerBug("duplicate symbol definition")
        for s in self.defined:
            if not 0 <= s.offset <= sizes[s.section]:
                raise CompilerBug(f"symbol {s.name} outside its section")
        known = set(names) | set(self.referenced)
        for r in self.relocs:
            if not 0 <= r.offset and r.offset + FIELD_WIDTH[r.kind] <= sizes[r.section]:
                raise CompilerBug(f"relocation field outside {r.section}")
            if r.target not in known:
                raise CompilerBug(f"relocation target {r.target} neither defined nor referenced")


def hex_lines(data: bytes, width: int = 16) -> list[str]:
    return [f"  {i:06x}  {data[i:i + width].hex(' ')}" for i in range(0, len(data), width)]


def dump_object(obj: ObjectCode) -> str:
    """Hex dump: sections, then relocations, then symbols."""
    out = [f"section text {len(obj.text)} bytes", *hex_lines(obj.text),
           f"section data {len(obj.data)} bytes", *hex_lines(obj.data),
           f"relocs {len(obj.relocs)}"]
    out += ["  " + r.render() for r in obj.relocs]
    out.append(f"symbols {len(obj.defined)}")
    out += ["  " + s.render() for s in obj.defined]
    return "\n".join(out) + "\n"
