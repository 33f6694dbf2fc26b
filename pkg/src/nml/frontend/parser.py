"""Recursive-descent parser for MiniML phrases.

Precedence, loosest first: ``let``/``fun``/``if``, ``;``, ``<-``, ``,``,
``||``, ``&&``, comparisons, additive, multiplicative, unary minus,
application, ``.( )`` indexing.
"""
from __future__ import annotations

from . import ast as A
from ..errors import NeedMoreInput, ParseError
from .lexer import Token, tokenize

CMP_OPS = ("=", "<>", "<", "<=", ">", ">=")
ADD_OPS = ("+", "-", "+.", "-.")
MUL_OPS = ("*", "/", "*.", "/.")

# tokens after which a trailing `;` does not start another sequence element
_SEQ_STOP = {("KW", "done"), ("KW", "end"), ("KW", "in"), ("KW", "then"),
             ("KW", "else"), ("OP", ")"), ("OP", ";;"), ("OP", "|]")}


class Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.pos = 0

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def at(self, kind: str, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_op(self, *ops) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def at_kw(self, *kws) -> bool:
        return self.tok.kind == "KW" and self.tok.value in kws

    def advance(self) -> Token:
        t = self.tok
        self.pos += 1
        return t

    def expect(self, kind: str, value) -> Token:
        if not self.at(kind, value):
            self.fail(f"expected '{value}'")
        return self.advance()

    def fail(self, msg: str):
        t = self.tok
        if t.kind == "EOF":
            raise NeedMoreInput(msg, (t.start, t.end))
        found = "';;'" if t.value == ";;" else repr(t.value)
        raise ParseError(f"{msg}, found {found}", (t.start, t.end))

    # -- phrases --
    def phrase(self):
        if self.at("EOF"):
            raise NeedMoreInput("empty input")
        if self.at_op(";;"):
            self.fail("expected a definition or expression")
        start = self.tok.start
        if self.at_kw("let"):
            rec, pat, bound = self.let_head()
            if self.at_kw("in"):
                self.advance()
                body = self.seq()
                root = A.LetIn(rec, pat, bound, body, span=(start, body.span[1]))
            else:
                root = A.Def(rec, pat, bound, span=(start, bound.span[1]))
        else:
            root = self.seq()
        if not self.at_op(";;"):
            self.fail("expected ';;'")
        self.advance()
        if not self.at("EOF"):
            t = self.tok
            raise ParseError("unexpected input after ';;'", (t.start, t.end))
        return root

    def let_head(self):
        self.expect("KW", "let")
        rec = False
        if self.at_kw("rec"):
            self.advance()
            rec = True
        pat = self.pattern()
        params = []
        while not self.at_op("="):
            if not isinstance(pat, A.PVar):
                self.fail("expected '='")
            params.append(self.param())
        self.advance()
        bound = self.seq()
        if params:
            bound = A.Fun(params, bound, span=(params[0].span[0], bound.span[1]))
        if rec and not (isinstance(pat, A.PVar) and isinstance(bound, A.Fun)):
            raise ParseError("'let rec' requires a function binding", pat.span)
        return rec, pat, bound

    def param(self):
        t = self.tok
        if t.kind == "IDENT":
            self.advance()
            return A.PVar(t.value, span=(t.start, t.end))
        if self.at_op("(") and self.toks[self.pos + 1].kind == "OP" and self.toks[self.pos + 1].value == ")":
            self.advance()
            e = self.advance()
            return A.PUnit(span=(t.start, e.end))
        self.fail("expected a parameter")

    def pattern(self):
        t = self.tok
        if t.kind == "IDENT":
            self.advance()
            if t.value == "_":
                return A.PWild(span=(t.start, t.end))
            return A.PVar(t.value, span=(t.start, t.end))
        if self.at_op("("):
            self.advance()
            if self.at_op(")"):
                e = self.advance()
                return A.PUnit(span=(t.start, e.end))
            items = [self.pattern()]
            while self.at_op(","):
                self.advance()
                items.append(self.pattern())
            e = self.expect("OP", ")")
            if len(items) == 1:
                return items[0]
            return A.PTuple(items, span=(t.start, e.end))
        self.fail("expected a pattern")

    # -- expressions --
    def seq(self):
        e = self.expr()
        if self.at_op(";"):
            self.advance()
            t = self.tok
            if t.kind == "EOF" or (t.kind, t.value) in _SEQ_STOP:
                return e
            rest = self.seq()
            return A.Seq(e, rest, span=(e.span[0], rest.span[1]))
        return e

    def expr(self):
        t = self.tok
        if self.at_kw("let"):
            rec, pat, bound = self.let_head()
            self.expect("KW", "in")
            body = self.seq()
            return A.LetIn(rec, pat, bound, body, span=(t.start, body.span[1]))
        if self.at_kw("fun"):
            self.advance()
            params = [self.param()]
            while not self.at_op("->"):
                params.append(self.param())
            self.advance()
            body = self.seq()
            return A.Fun(params, body, span=(t.start, body.span[1]))
        if self.at_kw("if"):
            self.advance()
            cond = self.seq()
            self.expect("KW", "then")
            then = self.expr()
            orelse = None
            end = then.span[1]
            if self.at_kw("else"):
                self.advance()
                orelse = self.expr()
                end = orelse.span[1]
            return A.If(cond, then, orelse, span=(t.start, end))
        return self.assign()

    def assign(self):
        lhs = self.tuple()
        if self.at_op("<-"):
            if not isinstance(lhs, A.Index):
                raise ParseError("left side of '<-' must be an array element", lhs.span)
            self.advance()
            v = self.expr()
            return A.Assign(lhs.array, lhs.index, v, span=(lhs.span[0], v.span[1]))
        return lhs

    def tuple(self):
        first = self.or_()
        if not self.at_op(","):
            return first
        items = [first]
        while self.at_op(","):
            self.advance()
            items.append(self.or_())
        return A.Tuple(items, span=(first.span[0], items[-1].span[1]))

    def or_(self):
        left = self.and_()
        if self.at_op("||"):
            self.advance()
            right = self.or_()
            return A.BinOp("||", left, right, span=(left.span[0], right.span[1]))
        return left

    def and_(self):
        left = self.cmp()
        if self.at_op("&&"):
            self.advance()
            right = self.and_()
            return A.BinOp("&&", left, right, span=(left.span[0], right.span[1]))
        return left

    def cmp(self):
        left = self.additive()
        while self.at_op(*CMP_OPS):
            op = self.advance().value
            right = self.additive()
            left = A.BinOp(op, left, right, span=(left.span[0], right.span[1]))
        return left

    def additive(self):
        left = self.multiplicative()
        while self.at_op(*ADD_OPS):
            op = self.advance().value
            right = self.multiplicative()
            left = A.BinOp(op, left, right, span=(left.span[0], right.span[1]))
        return left

    def multiplicative(self):
        left = self.unary()
        while self.at_op(*MUL_OPS) or self.at_kw("mod"):
            op = self.advance().value
            right = self.unary()
            left = A.BinOp(op, left, right, span=(left.span[0], right.span[1]))
        return left

    def unary(self):
        t = self.tok
        if self.at_op("-", "-."):
            self.advance()
            e = self.unary()
            if t.value == "-" and isinstance(e, A.Const) and e.kind == "float":
                # as in OCaml, "-" on a float literal yields a float constant
                return A.Const(-e.value, "float", span=(t.start, e.span[1]))
            return A.UnOp(t.value, e, span=(t.start, e.span[1]))
        if self.at_kw("let", "fun", "if"):
            return self.expr()
        return self.application()

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("INT", "FLOAT", "STRING", "IDENT"):
            return True
        if t.kind == "KW":
            return t.value in ("true", "false", "begin", "while", "for")
        return t.kind == "OP" and t.value in ("(", "[|")

    def application(self):
        fn = self.postfix()
        args = []
        while self.starts_atom():
            args.append(self.postfix())
        if args:
            return A.App(fn, args, span=(fn.span[0], args[-1].span[1]))
        return fn

    def postfix(self):
        e = self.atom()
        while self.at_op(".("):
            self.advance()
            idx = self.seq()
            end = self.expect("OP", ")")
            e = A.Index(e, idx, span=(e.span[0], end.end))
        return e

    def atom(self):
        t = self.tok
        sp = (t.start, t.end)
        if t.kind == "INT":
            self.advance()
            return A.Const(t.value, "int", span=sp)
        if t.kind == "FLOAT":
            self.advance()
            return A.Const(t.value, "float", span=sp)
        if t.kind == "STRING":
            self.advance()
            return A.Const(t.value, "string", span=sp)
        if t.kind == "IDENT":
            if t.value == "_":
                self.fail("expected an expression")
            self.advance()
            return A.Var(t.value, span=sp)
        if self.at_kw("true", "false"):
            self.advance()
            return A.Const(t.value == "true", "bool", span=sp)
        if self.at_op("("):
            self.advance()
            if self.at_op(")"):
                e = self.advance()
                return A.Const(None, "unit", span=(t.start, e.end))
            inner = self.seq()
            self.expect("OP", ")")
            return inner
        if self.at_kw("begin"):
            self.advance()
            if self.at_kw("end"):
                e = self.advance()
                return A.Const(None, "unit", span=(t.start, e.end))
            inner = self.seq()
            self.expect("KW", "end")
            return inner
        if self.at_op("[|"):
            self.advance()
            items = []
            while not self.at_op("|]"):
                items.append(self.expr())
                if self.at_op(";"):
                    self.advance()
                elif not self.at_op("|]"):
                    self.fail("expected ';' or '|]'")
            e = self.advance()
            return A.ArrayLit(items, span=(t.start, e.end))
        if self.at_kw("while"):
            self.advance()
            cond = self.seq()
            self.expect("KW", "do")
            body = self.loop_body()
            e = self.expect("KW", "done")
            return A.While(cond, body, span=(t.start, e.end))
        if self.at_kw("for"):
            self.advance()
            v = self.tok
            if v.kind != "IDENT":
                self.fail("expected a loop variable")
            self.advance()
            self.expect("OP", "=")
            lo = self.seq()
            self.expect("KW", "to")
            hi = self.seq()
            self.expect("KW", "do")
            body = self.loop_body()
            e = self.expect("KW", "done")
            return A.For(v.value, lo, hi, body, span=(t.start, e.end))
        self.fail("expected an expression")

    def loop_body(self):
        if self.at_kw("done"):
            return A.Const(None, "unit", span=(self.tok.start, self.tok.start))
        return self.seq()


def parse_phrase(src: str):
    """Parse one ``;;``-terminated phrase into a ``Def`` or an expression."""
    if not src.strip():
        raise NeedMoreInput("empty input")
    return Parser(src).phrase()


def parse_expr(src: str):
    """Parse a bare expression (no ``;;``); used by tests and tooling."""
    return parse_phrase(src + ";;")
