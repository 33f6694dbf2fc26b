"""A toplevel session: phrases in, printed text out, over either backend."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..bytecode.compile import compile_bytecode
from ..bytecode.instr import dump as dump_bytecode
from ..bytecode.vm import CodeSpace, run_bytecode
from ..errors import GlobalUnavailable, NeedMoreInput, NmlError, Trap
from ..frontend import ast as A
from ..frontend.infer import TypeEnv, infer_phrase
from ..frontend.lexer import split_phrases
from ..frontend.parser import parse_phrase
from ..frontend.types import format_type
from ..jit.emit import emit_object
from ..jit.objcode import dump_object
from ..lam import ir as L
from ..lam.simplify import simplify
from ..lam.translate import translate
from ..linkrun import memory as M
from ..linkrun.linker import GlobalSymbolTable, link_object
from ..linkrun.runtime import DEFAULT_ARENA, DEFAULT_STACK, Runtime
from ..nativegen.pipeline import NativeOptions, compile_native
from .format import format_result

BACKENDS = ("jit", "interp")
IR_STAGES = ("lambda", "bytecode", "clambda", "cmm", "mach", "linear")


@dataclass
class SessionConfig:
    backend: str = "jit"
    arena_size: int = DEFAULT_ARENA
    stack_size: int = DEFAULT_STACK
    emit_asm: bool = False
    dump_ir: tuple = ()
    dump_object: bool = False
    time: bool = False
    allocator: str = "linear"
    comballoc: bool = True
    keep_objects: bool = False  # remember (object, image) pairs for inspection
    simplify: bool = True


@dataclass
class PhraseResult:
    text: str
    status: str = "ok"  # ok | error | trap | quit

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "quit")


def global_symbol(phrase: int, name: str) -> str:
    # the phrase entry point owns ``nml_phrase<N>_entry``
    suffix = "entry.g" if name == "entry" else name
    return f"nml_phrase{phrase}_{suffix}"


@dataclass
class Session:
    config: SessionConfig = field(default_factory=SessionConfig)

    def __post_init__(self):
        if self.config.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.config.backend}")
        self.env = TypeEnv.initial()
        self.counter = 0
        self.vm_globals: dict = {}
        self.space = CodeSpace()
        self.table = GlobalSymbolTable()
        self.runtime: Runtime | None = None
        self.defined = {b: set() for b in BACKENDS}
        self.names: dict = {}  # symbol -> source name
        self.approx: dict = {}  # global symbol -> (label, arity) of its known function
        self.linked: list = []
        self._out: list = []

    @property
    def backend(self) -> str:
        return self.config.backend

    def write(self, s: str) -> None:
        self._out.append(s)

    def native(self) -> Runtime:
        if self.runtime is None:
            self.runtime = Runtime(self.table, self.write, self.config.arena_size,
                                   self.config.stack_size)
        return self.runtime

    def close(self) -> None:
        if self.runtime is not None:
            self.runtime.close()
            self.runtime = None

    # -- phrases --
    def eval_phrase(self, src: str) -> str:
        return self.eval(src).text

    def eval(self, src: str) -> PhraseResult:
        self._out = []
        if src.lstrip().startswith("#"):
            return self.directive(src)
        status = "ok"
        t0 = time.perf_counter()
        try:
            self._eval(src)
        except NeedMoreInput as e:
            status = "error"
            self.write(f"Syntax error: {e.message}\n")
        except NmlError as e:
            status = "error"
            self.write(e.render() + "\n")
        except Trap as e:
            status = "trap"
            self.write(f"Runtime error: {e.message}\n")
        except RecursionError:
            status = "error"
            self.write("Error: phrase too deeply nested\n")
        if self.config.time:
            self.write(f"Time: {time.perf_counter() - t0:.6f}s\n")
        return PhraseResult("".join(self._out), status)

    def _eval(self, src: str) -> None:
        root = parse_phrase(src)
        n = self.counter + 1
        tp, env = infer_phrase(self.env, root, lambda name: global_symbol(n, name))
        lam = translate(tp, self.env)
        if self.config.simplify:
            lam = simplify(lam)
        self.counter = n
        used = L.globals_used(lam)
        missing = sorted(used - self.defined[self.backend])
        if missing:
            other = "interp" if self.backend == "jit" else "jit"
            name = self.names.get(missing[0], missing[0])
            raise GlobalUnavailable(f"{name} is bound under the {other} backend only; "
                                    f"redefine it to use it here")
        self.dump("lambda", L.sexpr(lam))
        if self.backend == "jit":
            value, read, listing = self._run_native(lam, tp, n)
        else:
            value, read, listing = self._run_vm(lam, n)
        self.env = env
        for b in tp.bindings:
            self.defined[self.backend].add(b.symbol)
            self.names[b.symbol] = b.name
        self.echo(tp, value, read)
        if listing:
            self.write(listing)

    def dump(self, stage: str, text: str) -> None:
        if stage in self.config.dump_ir:
            self.write(f"(* {stage} *)\n{text.rstrip()}\n")

    def _run_vm(self, lam, n: int):
        prog = compile_bytecode(lam, self.space.next_base)
        self.dump("bytecode", dump_bytecode(prog))
        value = run_bytecode(prog, self.vm_globals, self.write, space=self.space)
        return value, self.vm_globals.__getitem__, None

    def _run_native(self, lam, tp, n: int):
        rt = self.native()
        options = NativeOptions(self.config.allocator, self.config.comballoc)
        unit = compile_native(lam, n, [b.symbol for b in tp.bindings], options,
                              approx=self.approx)
        for stage in ("clambda", "cmm", "mach", "linear"):
            if stage in self.config.dump_ir:
                self.dump(stage, unit.dump(stage))
        obj = emit_object(unit.linear, unit.data, n)
        if self.config.dump_object:
            self.write(dump_object(obj))
        img, _ = link_object(obj, self.table)
        if self.config.keep_objects:
            self.linked.append((obj, img))
        value = rt.call(img.symbols[unit.entry])
        self.approx.update(unit.clambda.exports)
        listing = obj.listing if self.config.emit_asm else None
        return value, lambda sym: M.read_word(self.table.lookup(sym)), listing

    def echo(self, tp, value, read) -> None:
        root = tp.root
        if isinstance(root, A.Def) and not isinstance(root.pat, A.PWild):
            for b in tp.bindings:
                ty = format_type(b.scheme.body)
                shown = format_result(b.scheme.body, read(b.symbol), self.backend)
                self.write(f"val {b.name} : {ty} = {shown}\n")
        else:
            ty = format_type(tp.ty, weak=not tp.generalized)
            self.write(f"- : {ty} = {format_result(tp.ty, value, self.backend)}\n")

    # -- directives --
    def directive(self, src: str) -> PhraseResult:
        text = src.strip()
        if text.endswith(";;"):
            text = text[:-2]
        words = text[1:].split()
        name, args = (words[0], words[1:]) if words else ("", [])
        if name == "quit" and not args:
            return PhraseResult("", "quit")
        if name == "backend" and len(args) == 1 and args[0] in BACKENDS:
            self.config.backend = args[0]
            return PhraseResult("")
        if name == "time" and not args:
            self.config.time = not self.config.time
            return PhraseResult("")
        if name == "emit_asm" and not args:
            self.config.emit_asm = not self.config.emit_asm
            return PhraseResult("")
        return PhraseResult(f"Unknown directive `{text.strip()}'\n", "error")

    # -- batches --
    def run_text(self, text: str, stop_on_error: bool = True):
        """Evaluate every phrase of ``text``; returns (output, ok)."""
        phrases, rest = split_phrases(text)
        out = []
        for p in phrases:
            r = self.eval(p)
            out.append(r.text)
            if r.status == "quit":
                return "".join(out), True
            if not r.ok and stop_on_error:
                return "".join(out), False
        if rest.strip():
            out.append("Syntax error: unterminated phrase at end of input\n")
            return "".join(out), False
        return "".join(out), True


def run_program(text: str, **config) -> tuple[str, bool]:
    """Run ``text`` in a fresh session and close it."""
    s = Session(SessionConfig(**config))
    try:
        return s.run_text(text)
    finally:
        s.close()
