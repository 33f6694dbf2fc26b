"""Primitive operations shared by the typer, the lambda IR and both backends."""
from __future__ import annotations

from .frontend.types import (BOOL, FLOAT, INT, STRING, UNIT, TArray, TVar,
                             TypeScheme, arrow)

# name -> arity.  Parameterised operators (FIELD n, SETGLOBAL sym) carry their
# parameter next to the op in the Prim node.
PRIM_ARITY = {
    "ADDINT": 2, "SUBINT": 2, "MULINT": 2, "DIVINT": 2, "MODINT": 2,
    "EQ": 2, "NE": 2, "LT": 2, "LE": 2, "GT": 2, "GE": 2,
    "ADDFLOAT": 2, "SUBFLOAT": 2, "MULFLOAT": 2, "DIVFLOAT": 2,
    "NOT": 1,
    "MAKEBLOCK": -1, "FIELD": 1, "MAKEARRAY": -1,
    "ARRAYMAKE": 2, "ARRAYGET": 2, "ARRAYSET": 3, "ARRAYLENGTH": 1,
    "STRINGLENGTH": 1,
    "PRINTINT": 1, "PRINTFLOAT": 1, "PRINTSTRING": 1, "PRINTNEWLINE": 1,
    "FLOATOFINT": 1, "INTOFFLOAT": 1,
    "SETGLOBAL": 1,
}

INT_BINOPS = {"ADDINT", "SUBINT", "MULINT", "DIVINT", "MODINT"}
COMPARISONS = {"EQ", "NE", "LT", "LE", "GT", "GE"}
FLOAT_BINOPS = {"ADDFLOAT", "SUBFLOAT", "MULFLOAT", "DIVFLOAT"}

# primitives with no side effect and no possible trap
PURE = INT_BINOPS - {"DIVINT", "MODINT"} | COMPARISONS | FLOAT_BINOPS | {
    "NOT", "MAKEBLOCK", "FIELD", "ARRAYLENGTH", "STRINGLENGTH", "FLOATOFINT",
    "INTOFFLOAT"}

BINOP_PRIMS = {
    "+": "ADDINT", "-": "SUBINT", "*": "MULINT", "/": "DIVINT", "mod": "MODINT",
    "=": "EQ", "<>": "NE", "<": "LT", "<=": "LE", ">": "GT", ">=": "GE",
    "+.": "ADDFLOAT", "-.": "SUBFLOAT", "*.": "MULFLOAT", "/.": "DIVFLOAT",
}


def _poly(build):
    a = TVar(-1)
    return TypeScheme(frozenset({a.id}), build(a))


# builtin identifier -> (scheme, primitive, arity)
BUILTINS = {
    "print_int": (TypeScheme.mono(arrow(INT, UNIT)), "PRINTINT", 1),
    "print_float": (TypeScheme.mono(arrow(FLOAT, UNIT)), "PRINTFLOAT", 1),
    "print_string": (TypeScheme.mono(arrow(STRING, UNIT)), "PRINTSTRING", 1),
    "print_newline": (TypeScheme.mono(arrow(UNIT, UNIT)), "PRINTNEWLINE", 1),
    "array_make": (_poly(lambda a: arrow(INT, a, TArray(a))), "ARRAYMAKE", 2),
    "array_length": (_poly(lambda a: arrow(TArray(a), INT)), "ARRAYLENGTH", 1),
    "array_get": (_poly(lambda a: arrow(TArray(a), INT, a)), "ARRAYGET", 2),
    "array_set": (_poly(lambda a: arrow(TArray(a), INT, a, UNIT)), "ARRAYSET", 3),
    "string_length": (TypeScheme.mono(arrow(STRING, INT)), "STRINGLENGTH", 1),
    "float_of_int": (TypeScheme.mono(arrow(INT, FLOAT)), "FLOATOFINT", 1),
    "int_of_float": (TypeScheme.mono(arrow(FLOAT, INT)), "INTOFFLOAT", 1),
    "not": (TypeScheme.mono(arrow(BOOL, BOOL)), "NOT", 1),
}
