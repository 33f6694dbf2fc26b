from __future__ import annotations


class NmlError(Exception):
    """Base class for diagnostics reported to the toplevel user."""

    kind = "Error"

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def render(self) -> str:
        where = f"Characters {self.span[0]}-{self.span[1]}: " if self.span else ""
        return f"{where}{self.kind}: {self.message}"


class ParseError(NmlError):
    kind = "Syntax error"


class NeedMoreInput(ParseError):
    """Raised when a phrase is not yet terminated by ``;;``."""


class TypingError(NmlError):
    kind = "Type error"


class GlobalUnavailable(NmlError):
    kind = "Error"


class CompilerBug(NmlError):
    kind = "Internal compiler error"


class LinkError(NmlError):
    kind = "Link error"


# trap kinds shared by both backends; the numeric codes are passed to nml_rt_trap
TRAP_BOUNDS = 1
TRAP_DIVZERO = 2
TRAP_OOM = 3
TRAP_STACK = 4
TRAP_INVALID = 5

TRAP_NAMES = {
    TRAP_BOUNDS: "bounds",
    TRAP_DIVZERO: "divide-by-zero",
    TRAP_OOM: "out-of-memory",
    TRAP_STACK: "stack-overflow",
    TRAP_INVALID: "invalid-argument",
}

TRAP_MESSAGES = {
    TRAP_BOUNDS: "index out of bounds",
    TRAP_DIVZERO: "division by zero",
    TRAP_OOM: "heap arena exhausted",
    TRAP_STACK: "stack overflow",
    TRAP_INVALID: "invalid argument",
}


class Trap(Exception):
    """A runtime trap that unwound to the phrase boundary."""

    def __init__(self, code: int):
        super().__init__(TRAP_MESSAGES.get(code, f"trap {code}"))
        self.code = code

    @property
    def kind(self) -> str:
        return TRAP_NAMES.get(self.code, "unknown")

    @property
    def message(self) -> str:
        return TRAP_MESSAGES.get(self.code, f"trap {self.code}")

    def render(self) -> str:
        return f"Runtime error: {self.message}"
