"""Tokenizer for MiniML.  Nested ``(* ... *)`` comments are skipped."""
from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import NeedMoreInput, ParseError

KEYWORDS = {
    "let", "rec", "in", "fun", "if", "then", "else", "while", "do", "done",
    "for", "to", "true", "false", "mod", "begin", "end",
}

# longest first
SYMBOLS = [
    ";;", "->", "<-", "<>", "<=", ">=", "&&", "||", "+.", "-.", "*.", "/.",
    "[|", "|]", ".(", "(", ")", ";", ",", "=", "<", ">", "+", "-", "*", "/",
]

MAX_INT = (1 << 62) - 1

_NUMBER = re.compile(r"[0-9][0-9_]*(\.[0-9_]*)?([eE][+-]?[0-9]+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'", "r": "\r"}


@dataclass(frozen=True)
class Token:
    kind: str  # INT FLOAT STRING IDENT KW OP EOF
    value: object
    start: int
    end: int


def wrap63(n: int) -> int:
    """Reduce ``n`` into the signed 63-bit range."""
    n &= (1 << 63) - 1
    return n - (1 << 63) if n >= (1 << 62) else n


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if src.startswith("(*", i):
            i = _skip_comment(src, i)
            continue
        start = i
        if c.isdigit():
            m = _NUMBER.match(src, i)
            text = m.group(0)
            i = m.end()
            clean = text.replace("_", "")
            if m.group(1) is not None or m.group(2) is not None:
                toks.append(Token("FLOAT", float(clean), start, i))
            else:
                v = int(clean)
                if v > MAX_INT + 1:
                    raise ParseError("integer literal exceeds the range of int", (start, i))
                toks.append(Token("INT", wrap63(v), start, i))
            continue
        if c.isalpha() or c == "_":
            m = _IDENT.match(src, i)
            word = m.group(0)
            i = m.end()
            if word in KEYWORDS:
                toks.append(Token("KW", word, start, i))
            else:
                toks.append(Token("IDENT", word, start, i))
            continue
        if c == '"':
            i, s = _read_string(src, i)
            toks.append(Token("STRING", s, start, i))
            continue
        for sym in SYMBOLS:
            if src.startswith(sym, i):
                i += len(sym)
                toks.append(Token("OP", sym, start, i))
                break
        else:
            raise ParseError(f"illegal character {c!r}", (i, i + 1))
    toks.append(Token("EOF", None, n, n))
    return toks


def _skip_comment(src: str, i: int) -> int:
    depth = 0
    n = len(src)
    while i < n:
        if src.startswith("(*", i):
            depth += 1
            i += 2
        elif src.startswith("*)", i):
            depth -= 1
            i += 2
            if depth == 0:
                return i
        elif src[i] == '"':
            i, _ = _read_string(src, i)
        else:
            i += 1
    raise NeedMoreInput("unterminated comment")


def _read_string(src: str, i: int) -> tuple[int, str]:
    out = []
    i += 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == '"':
            return i + 1, "".join(out)
        if c == "\\":
            if i + 1 >= n:
                break
            esc = src[i + 1]
            if src[i + 1:i + 4].isdigit() and len(src[i + 1:i + 4]) == 3:
                code = int(src[i + 1:i + 4])
                if code > 255:
                    raise ParseError(f"illegal escape \\{src[i + 1:i + 4]}", (i, i + 4))
                out.append(chr(code))
                i += 4
                continue
            if esc not in _ESCAPES:
                raise ParseError(f"illegal escape \\{esc}", (i, i + 2))
            out.append(_ESCAPES[esc])
            i += 2
            continue
        out.append(c)
        i += 1
    raise NeedMoreInput("unterminated string literal")


def _skip_string(src: str, i: int) -> int:
    """Index past the string opening at ``i``, or -1 if it never closes."""
    i += 1
    while i < len(src):
        if src[i] == "\\":
            i += 2
        elif src[i] == '"':
            return i + 1
        else:
            i += 1
    return -1


def split_phrases(text: str) -> tuple[list[str], str]:
    """Split ``text`` at top-level ``;;`` tokens.

    Returns the complete phrases (each including its ``;;``) and the
    unterminated remainder.  Comments and strings are respected; a remainder
    that is only whitespace or comments comes back as ``""``.
    """
    phrases = []
    start = 0
    i, n = 0, len(text)
    while i < n:
        if text.startswith("(*", i):
            try:
                i = _skip_comment(text, i)
            except NeedMoreInput:
                return phrases, text[start:]
            continue
        c = text[i]
        if c == '"':
            i = _skip_string(text, i)
            if i < 0:
                return phrases, text[start:]
            continue
        if text.startswith(";;", i):
            i += 2
            phrases.append(text[start:i])
            start = i
            continue
        i += 1
    rest = text[start:]
    if _only_trivia(rest):
        rest = ""
    return phrases, rest


def _only_trivia(s: str) -> bool:
    try:
        return tokenize(s)[0].kind == "EOF"
    except (NeedMoreInput, ParseError):
        return False
