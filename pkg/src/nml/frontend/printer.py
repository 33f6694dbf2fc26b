"""Fully parenthesised source rendering of syntax trees (re-parses to an equal tree)."""
from __future__ import annotations

import math

from . import ast as A


def show_float(x: float) -> str:
    r = repr(x)
    if r.endswith(".0"):
        return r[:-1]
    return r


def show_string(s: str) -> str:
    out = ['"']
    for c in s:
        if c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        elif c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif ord(c) < 32 or ord(c) == 127:
            out.append(f"\\{ord(c):03d}")
        else:
            out.append(c)
    out.append('"')
    return "".join(out)


def show_pattern(p) -> str:
    if isinstance(p, A.PVar):
        return p.name
    if isinstance(p, A.PWild):
        return "_"
    if isinstance(p, A.PUnit):
        return "()"
    return "(" + ", ".join(show_pattern(q) for q in p.items) + ")"


def show_expr(e) -> str:
    if isinstance(e, A.Const):
        if e.kind == "int":
            if e.value == -(1 << 62):
                return str(1 << 62)
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if e.kind == "float":
            if math.copysign(1.0, e.value) < 0:
                return f"(- {show_float(-e.value)})"
            return show_float(e.value)
        if e.kind == "bool":
            return "true" if e.value else "false"
        if e.kind == "unit":
            return "()"
        return show_string(e.value)
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Fun):
        ps = " ".join(show_pattern(p) for p in e.params)
        return f"(fun {ps} -> {show_expr(e.body)})"
    if isinstance(e, A.App):
        return "(" + " ".join(show_expr(x) for x in [e.fn, *e.args]) + ")"
    if isinstance(e, A.BinOp):
        return f"({show_expr(e.left)} {e.op} {show_expr(e.right)})"
    if isinstance(e, A.UnOp):
        return f"({e.op} {show_expr(e.operand)})"
    if isinstance(e, A.If):
        s = f"(if {show_expr(e.cond)} then {show_expr(e.then)}"
        if e.orelse is not None:
            s += f" else {show_expr(e.orelse)}"
        return s + ")"
    if isinstance(e, A.Seq):
        return f"({show_expr(e.first)}; {show_expr(e.second)})"
    if isinstance(e, A.LetIn):
        return f"({_let(e.rec, e.pat, e.bound)} in {show_expr(e.body)})"
    if isinstance(e, A.Tuple):
        return "(" + ", ".join(show_expr(x) for x in e.items) + ")"
    if isinstance(e, A.ArrayLit):
        return "[|" + "; ".join(show_expr(x) for x in e.items) + "|]"
    if isinstance(e, A.Index):
        return f"{_atomic(e.array)}.({show_expr(e.index)})"
    if isinstance(e, A.Assign):
        return f"({_atomic(e.array)}.({show_expr(e.index)}) <- {show_expr(e.value)})"
    if isinstance(e, A.While):
        return f"(while {show_expr(e.cond)} do {show_expr(e.body)} done)"
    if isinstance(e, A.For):
        return (f"(for {e.var} = {show_expr(e.lo)} to {show_expr(e.hi)} do "
                f"{show_expr(e.body)} done)")
    raise TypeError(e)


def _atomic(e) -> str:
    s = show_expr(e)
    if isinstance(e, (A.Var, A.Index)) or s.startswith("("):
        return s
    return f"({s})"


def _let(rec: bool, pat, bound) -> str:
    kw = "let rec" if rec else "let"
    return f"{kw} {show_pattern(pat)} = {show_expr(bound)}"


def show_phrase(root) -> str:
    if isinstance(root, A.Def):
        return _let(root.rec, root.pat, root.bound) + ";;"
    return show_expr(root) + ";;"
