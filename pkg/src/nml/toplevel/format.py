"""Type-directed rendering of results from either backend."""
from __future__ import annotations

from ..frontend.printer import show_float, show_string
from ..frontend.types import TArray, TArrow, TCon, TTuple, TVar, resolve
from ..linkrun import memory as M
from ..linkrun.runtime import header, read_float, read_string, to_signed


def format_vm(t, v) -> str:
    """Render a bytecode VM value of type ``t``."""
    t = resolve(t)
    if isinstance(t, TCon):
        n = t.name
        if n == "int":
            return str(v)
        if n == "bool":
            return "true" if v else "false"
        if n == "unit":
            return "()"
        if n == "float":
            return show_float(v)
        return show_string(v)
    if isinstance(t, TArray):
        return "[|" + "; ".join(format_vm(t.elem, x) for x in v) + "|]"
    if isinstance(t, TTuple):
        return "(" + ", ".join(format_vm(et, x) for et, x in zip(t.elems, v)) + ")"
    if isinstance(t, TArrow):
        return "<fun>"
    return "<poly>"


def format_native(t, w: int) -> str:
    """Render a tagged machine word of type ``t``; blocks are read from memory."""
    t = resolve(t)
    w &= 0xFFFFFFFFFFFFFFFF
    if isinstance(t, TCon):
        n = t.name
        if n == "int":
            return str(to_signed(w) >> 1)
        if n == "bool":
            return "true" if w == 3 else "false"
        if n == "unit":
            return "()"
        if n == "float":
            return show_float(read_float(w))
        return show_string(read_string(w))
    if isinstance(t, TArray):
        size, _ = header(w)
        return "[|" + "; ".join(format_native(t.elem, M.read_word(w + 8 * k))
                                for k in range(size)) + "|]"
    if isinstance(t, TTuple):
        return "(" + ", ".join(format_native(et, M.read_word(w + 8 * k))
                               for k, et in enumerate(t.elems)) + ")"
    if isinstance(t, TArrow):
        return "<fun>"
    if isinstance(t, TVar):
        return "<poly>"
    return "<poly>"


def format_result(t, v, backend: str = "interp") -> str:
    return format_native(t, v) if backend == "jit" else format_vm(t, v)
