"""Command line: ``nml`` (toplevel), ``nml run FILE``, ``nml bench``."""
from __future__ import annotations

import argparse
import sys

from .. import __version__
from ..frontend.lexer import split_phrases
from ..linkrun.runtime import DEFAULT_ARENA
from .bench import BENCHMARKS, BenchmarkFailure, run_benchmarks
from .session import BACKENDS, IR_STAGES, Session, SessionConfig

PROMPT = "# "
CONTINUE = "  "


def _add_globals(p: argparse.ArgumentParser, sub: bool) -> None:
    # subcommands accept the global flags too; SUPPRESS keeps them from
    # overwriting values given before the subcommand name
    d = (lambda v: argparse.SUPPRESS) if sub else (lambda v: v)
    p.add_argument("--backend", choices=BACKENDS, default=d("jit"))
    p.add_argument("--emit-asm", action="store_true", default=d(False),
                   help="print the assembly listing of each phrase")
    p.add_argument("--dump-ir", action="append", choices=IR_STAGES, default=d([]),
                   metavar="STAGE", help="print an intermediate form (repeatable): "
                   + ", ".join(IR_STAGES))
    p.add_argument("--dump-object", action="store_true", default=d(False),
                   help="print each phrase's relocatable object")
    p.add_argument("--arena-size", type=_size, default=d(DEFAULT_ARENA), metavar="BYTES")


def _size(text: str) -> int:
    n = int(text, 0)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nml", description="MiniML toplevel with a native JIT.")
    p.add_argument("--version", action="version", version=f"nml {__version__}")
    _add_globals(p, sub=False)
    cmds = p.add_subparsers(dest="command")
    run = cmds.add_parser("run", help="evaluate a script, stopping at the first error")
    run.add_argument("file")
    _add_globals(run, sub=True)
    bench = cmds.add_parser("bench", help="time the benchmark corpus on both backends")
    bench.add_argument("--select", default=None, metavar="A,B",
                       help="comma-separated subset of " + ", ".join(BENCHMARKS))
    bench.add_argument("--iterations", type=int, default=2, metavar="N")
    bench.add_argument("--csv", default=None, metavar="PATH")
    _add_globals(bench, sub=True)
    return p


def session_from(args) -> Session:
    return Session(SessionConfig(backend=args.backend, arena_size=args.arena_size,
                                 emit_asm=args.emit_asm, dump_ir=tuple(args.dump_ir),
                                 dump_object=args.dump_object))


def run_file(args, out=None) -> int:
    out = out or sys.stdout
    try:
        with open(args.file) as fh:
            text = fh.read()
    except OSError as e:
        print(f"nml: cannot read {args.file}: {e.strerror}", file=sys.stderr)
        return 2
    s = session_from(args)
    try:
        phrases, rest = split_phrases(text)
        for p in phrases:
            r = s.eval(p)
            out.write(r.text)
            out.flush()
            if r.status == "quit":
                return 0
            if not r.ok:
                return 1
        if rest.strip():
            out.write("Syntax error: unterminated phrase at end of input\n")
            return 1
        return 0
    finally:
        s.close()


def _read_line(prompt: str, stdin, out):
    if stdin.isatty():
        try:
            return input(prompt) + "\n"
        except EOFError:
            return None
    out.write(prompt)
    out.flush()
    line = stdin.readline()
    return line or None


def repl(args, stdin=None, out=None) -> int:
    """Read phrases until ``#quit;;`` or end of input."""
    stdin, out = stdin or sys.stdin, out or sys.stdout
    s = session_from(args)
    if stdin.isatty():
        out.write(f"        nml version {__version__} ({args.backend} backend)\n\n")
    buf = ""
    try:
        while True:
            try:
                line = _read_line(PROMPT if not buf.strip() else CONTINUE, stdin, out)
            except KeyboardInterrupt:
                out.write("\nInterrupted.\n")
                buf = ""
                continue
            if line is None:
                out.write("\n")
                return 0
            buf += line
            phrases, buf = split_phrases(buf)
            for p in phrases:
                r = s.eval(p)
                out.write(r.text)
                out.flush()
                if r.status == "quit":
                    return 0
    finally:
        s.close()


def bench(args, out=None) -> int:
    out = out or sys.stdout
    if args.iterations < 2:
        print("nml bench: --iterations must be at least 2", file=sys.stderr)
        return 2
    selection = [x.strip() for x in args.select.split(",") if x.strip()] if args.select else None
    unknown = [x for x in selection or () if x not in BENCHMARKS]
    if unknown:
        print(f"nml bench: unknown benchmark {unknown[0]!r}; choose from "
              + ", ".join(BENCHMARKS), file=sys.stderr)
        return 2
    try:
        report = run_benchmarks(selection, args.iterations, args.csv, args.arena_size,
                                progress=lambda line: print(line, file=sys.stderr))
    except BenchmarkFailure as e:
        print(f"nml bench: {e}", file=sys.stderr)
        return 1
    out.write(report.table() + "\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return run_file(args)
    if args.command == "bench":
        return bench(args)
    return repl(args)


if __name__ == "__main__":
    sys.exit(main())
