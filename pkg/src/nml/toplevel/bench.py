"""Benchmark harness: fastest of N runs per backend, outputs cross-checked first."""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from importlib import resources

from ..linkrun.runtime import DEFAULT_ARENA
from .session import Session, SessionConfig

BENCHMARKS = ("fib", "sieve", "quicksort", "boyer-mini", "fft-mini", "nucleic-mini")
CSV_HEADER = ("benchmark", "backend", "iterations", "best_seconds", "speedup")


class BenchmarkFailure(RuntimeError):
    """A benchmark errored, trapped, or printed different text per backend."""


@dataclass(frozen=True)
class BenchRow:
    benchmark: str
    backend: str
    iterations: int
    best_seconds: float
    speedup: float  # interpreter best / this backend's best


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def row(self, benchmark: str, backend: str) -> BenchRow:
        for r in self.rows:
            if r.benchmark == benchmark and r.backend == backend:
                return r
        raise KeyError((benchmark, backend))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r.benchmark, r.backend, r.iterations,
                            f"{r.best_seconds:.6f}", f"{r.speedup:.2f}"])

    def table(self) -> str:
        lines = [f"{'benchmark':<14}{'backend':<8}{'iters':>6}{'best (s)':>12}{'speedup':>10}"]
        for r in self.rows:
            lines.append(f"{r.benchmark:<14}{r.backend:<8}{r.iterations:>6}"
                         f"{r.best_seconds:>12.4f}{r.speedup:>10.2f}")
        return "\n".join(lines)


def benchmark_source(name: str) -> str:
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {', '.join(BENCHMARKS)}")
    return resources.files("nml").joinpath("bench", f"{name}.ml").read_text()


def time_once(src: str, backend: str, arena_size: int = DEFAULT_ARENA) -> tuple[float, str]:
    """Wall time and printed output of ``src`` in a fresh session."""
    s = Session(SessionConfig(backend=backend, arena_size=arena_size))
    try:
        t0 = time.perf_counter()
        out, ok = s.run_text(src)
        elapsed = time.perf_counter() - t0
    finally:
        s.close()
    if not ok:
        raise BenchmarkFailure(f"{backend} run failed:\n{out}")
    return elapsed, out


def run_benchmarks(selection=None, iterations: int = 2, csv_path=None,
                   arena_size: int = DEFAULT_ARENA, progress=None) -> BenchReport:
    """Run each selected benchmark ``iterations`` times under both backends.

    Every run's output must equal the interpreter's first output; only then
    are best times reported.  ``progress`` gets one line per finished run.
    """
    if iterations < 2:
        raise ValueError("iterations must be at least 2")
    names = list(selection) if selection else list(BENCHMARKS)
    for n in names:
        benchmark_source(n)  # reject unknown names before any timing
    report = BenchReport()
    for name in names:
        src = benchmark_source(name)
        best: dict = {}
        reference = None
        for backend in ("interp", "jit"):
            times = []
            for k in range(iterations):
                t, out = time_once(src, backend, arena_size)
                if reference is None:
                    reference = out
                elif out != reference:
                    raise BenchmarkFailure(f"{name}: {backend} output differs from interp")
                times.append(t)
                if progress:
                    progress(f"{name} {backend} run {k + 1}/{iterations}: {t:.4f}s")
            best[backend] = min(times)
        for backend in ("interp", "jit"):
            report.rows.append(BenchRow(name, backend, iterations, best[backend],
                                        best["interp"] / best[backend]))
    if csv_path:
        report.write_csv(csv_path)
    return report
