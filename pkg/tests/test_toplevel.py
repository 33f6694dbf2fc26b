import csv
import io

import pytest

from nml.frontend.types import BOOL, FLOAT, INT, TArray, TTuple
from nml.toplevel import bench as B
from nml.toplevel import cli
from nml.toplevel.format import format_native, format_vm
from nml.toplevel.session import Session, SessionConfig, run_program

BACKENDS = ["jit", "interp"]


@pytest.mark.parametrize("backend", BACKENDS)
class TestEcho:
    def test_definition_then_use(self, session, backend):
        s = session(backend=backend)
        assert s.eval("let f x = x * 2;;").text == "val f : int -> int = <fun>\n"
        assert s.eval("f 21;;").text == "- : int = 42\n"

    def test_float_sum(self, session, backend):
        assert session(backend=backend).eval("1.5 +. 2.25;;").text == "- : float = 3.75\n"

    def test_float_array(self, session, backend):
        assert session(backend=backend).eval("[|1.0; 0.5|];;").text == "- : float array = [|1.; 0.5|]\n"

    def test_tuple(self, session, backend):
        assert session(backend=backend).eval("(7, true);;").text == "- : int * bool = (7, true)\n"

    def test_destructuring_definition(self, session, backend):
        text = session(backend=backend).eval('let (n, s) = (3, "x\\n");;').text
        assert text == 'val n : int = 3\nval s : string = "x\\n"\n'

    def test_closure_over_earlier_phrase(self, session, backend):
        s = session(backend=backend)
        s.eval("let k = 10;;")
        s.eval("let add x = x + k;;")
        assert s.eval("add 32;;").text == "- : int = 42\n"

    def test_shadowing_keeps_old_closures(self, session, backend):
        s = session(backend=backend)
        s.eval("let k = 1;;")
        s.eval("let get () = k;;")
        s.eval("let k = 2;;")
        assert s.eval("(get (), k);;").text == "- : int * int = (1, 2)\n"

    def test_errors_leave_state(self, session, backend):
        s = session(backend=backend)
        s.eval("let x = 5;;")
        assert s.eval("let x = 1 + ;;").status == "error"
        assert s.eval("let x = true + 1;;").status == "error"
        assert s.eval("x;;").text == "- : int = 5\n"

    def test_print_then_value(self, session, backend):
        s = session(backend=backend)
        assert s.eval('print_string "hi"; print_newline (); 3;;').text == "hi\n- : int = 3\n"


class TestFormat:
    def test_native_int(self):
        assert format_native(INT, 85) == "42"
        assert format_native(INT, (1 << 64) - 1) == "-1"

    def test_vm_values(self):
        assert format_vm(TArray(FLOAT), [1.0, 0.5]) == "[|1.; 0.5|]"
        assert format_vm(TTuple([INT, BOOL]), [7, 1]) == "(7, true)"

    @pytest.mark.parametrize("src,shown", [
        ("1e22;;", "1e+22"), ("0.1 +. 0.2;;", "0.30000000000000004"), ("-0.0;;", "-0."),
        ("1.0 /. 0.0;;", "inf"), ("[||];;", "[||]"), ('"tab\\there";;', '"tab\\there"'),
        ("fun x -> x;;", "<fun>"), ("();;", "()"),
    ])
    def test_backends_render_alike(self, src, shown):
        texts = {b: run_program(src, backend=b)[0] for b in BACKENDS}
        assert texts["jit"] == texts["interp"]
        assert texts["jit"].rstrip("\n").endswith("= " + shown)


class TestDirectives:
    def test_switch_backend(self, session):
        s = session()
        assert s.eval("#backend interp;;").text == ""
        assert s.backend == "interp"
        assert s.eval("1 + 1;;").text == "- : int = 2\n"
        assert s.runtime is None  # nothing ran natively

    def test_time_toggle(self, session):
        s = session()
        s.eval("#time;;")
        lines = s.eval("();;").text.splitlines()
        assert lines[0] == "- : unit = ()" and lines[1].startswith("Time: ")
        s.eval("#time;;")
        assert s.eval("();;").text == "- : unit = ()\n"

    def test_unknown(self, session):
        r = session().eval("#bogus;;")
        assert r.status == "error" and r.text.startswith("Unknown directive")

    def test_quit(self, session):
        assert session().eval("#quit;;").status == "quit"

    def test_emit_asm_toggle(self, session):
        s = session()
        s.eval("#emit_asm;;")
        assert "nml_phrase1_entry:" in s.eval("();;").text

    def test_type_env_crosses_switch_but_values_do_not(self, session):
        s = session()
        s.eval("let v = 7;;")
        s.eval("#backend interp;;")
        r = s.eval("v + 1;;")
        assert r.status == "error"
        assert r.text == "Error: v is bound under the jit backend only; redefine it to use it here\n"
        s.eval("let v = 8;;")
        assert s.eval("v + 1;;").text == "- : int = 9\n"
        s.eval("#backend jit;;")
        assert s.eval("v;;").status == "error"

    def test_counter_increases(self, session):
        s = session()
        seen = []
        for src in ["1;;", "bad syntax (;;", "2;;", "#time;;", "3;;"]:
            s.eval(src)
            seen.append(s.counter)
        assert seen == sorted(seen) and seen[-1] == 3


class TestDumps:
    @pytest.mark.parametrize("stage", ["lambda", "bytecode", "clambda", "cmm", "mach", "linear"])
    def test_each_stage_deterministic(self, stage):
        backend = "interp" if stage == "bytecode" else "jit"
        src = "let f a = a.(0) + 1;;"
        a = run_program(src, backend=backend, dump_ir=(stage,))[0]
        b = run_program(src, backend=backend, dump_ir=(stage,))[0]
        assert a == b and a.startswith(f"(* {stage} *)\n")

    def test_dump_object(self):
        out = run_program("();;", dump_object=True)[0]
        assert "section text" in out and "relocs" in out and "nml_phrase1_entry text+0x0 global" in out


# -- command line ----------------------------------------------------------------

def write(tmp_path, text, name="s.ml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("backend", BACKENDS)
class TestRunScript:
    def test_script(self, tmp_path, capsys, backend):
        code = cli.main(["run", "--backend", backend, write(tmp_path, "let x = 1;; print_int x;;")])
        assert code == 0
        assert capsys.readouterr().out == "val x : int = 1\n1- : unit = ()\n"

    def test_type_error_in_second_phrase(self, tmp_path, capsys, backend):
        path = write(tmp_path, "let y = 2;;\ny + true;;\nprint_int 99;;")
        assert cli.main(["--backend", backend, "run", path]) == 1
        out = capsys.readouterr().out
        assert out.startswith("val y : int = 2\n") and "Type error" in out and "99" not in out

    def test_empty_file(self, tmp_path, capsys, backend):
        assert cli.main(["run", "--backend", backend, write(tmp_path, "")]) == 0
        assert capsys.readouterr().out == ""

    def test_trap_is_an_error(self, tmp_path, capsys, backend):
        assert cli.main(["run", "--backend", backend, write(tmp_path, "1 / 0;;")]) == 1

    def test_unterminated_tail(self, tmp_path, capsys, backend):
        assert cli.main(["run", "--backend", backend, write(tmp_path, "1;; 2")]) == 1


def test_missing_file_is_usage_error(tmp_path, capsys):
    assert cli.main(["run", str(tmp_path / "nope.ml")]) == 2


def test_bad_flag_is_usage_error():
    with pytest.raises(SystemExit) as e:
        cli.main(["--backend", "llvm"])
    assert e.value.code == 2


def repl_transcript(text, *flags):
    out = io.StringIO()
    args = cli.build_parser().parse_args(list(flags))
    code = cli.repl(args, io.StringIO(text), out)
    return code, out.getvalue()


def test_repl_prompts_and_continuation():
    code, out = repl_transcript("let f x =\n  x + 1;;\nf 41;;\n")
    assert code == 0
    assert out == "# " + "  " + "val f : int -> int = <fun>\n" + "# - : int = 42\n" + "# \n"


def test_repl_quit_and_several_phrases_per_line():
    code, out = repl_transcript("1;; 2;;\n#quit;;\n3;;\n")
    assert code == 0
    assert out == "# - : int = 1\n- : int = 2\n# "


def test_repl_same_transcript_on_both_backends():
    text = "let sq x = x * x;;\nlet a = [|1; 2; 3|];;\na.(1) <- sq 9;;\na;;\na.(7);;\n(sq 3, 2.5);;\n"
    _, jit = repl_transcript(text, "--backend", "jit")
    _, interp = repl_transcript(text, "--backend", "interp")
    assert jit == interp
    assert "[|1; 81; 3|]" in jit and "index out of bounds" in jit


# -- benchmark harness ---------------------------------------------------------

SMALL_SIEVE = B.benchmark_source("sieve").replace("sieve 3000000", "sieve 20000")


@pytest.fixture
def small_sieve(monkeypatch):
    real = B.benchmark_source
    monkeypatch.setattr(B, "benchmark_source", lambda n: SMALL_SIEVE if n == "sieve" else real(n))


def test_sieve_report(small_sieve, tmp_path):
    path = tmp_path / "out.csv"
    report = B.run_benchmarks(["sieve"], iterations=2, csv_path=path)
    jit, interp = report.row("sieve", "jit"), report.row("sieve", "interp")
    assert jit.speedup > 1 and interp.speedup == 1
    assert jit.speedup == pytest.approx(interp.best_seconds / jit.best_seconds)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["benchmark", "backend", "iterations", "best_seconds", "speedup"]
    assert [r[:3] for r in rows[1:]] == [["sieve", "interp", "2"], ["sieve", "jit", "2"]]


def test_iterations_must_be_two_or_more():
    with pytest.raises(ValueError):
        B.run_benchmarks(["sieve"], iterations=1)


def test_cli_rejects_one_iteration(capsys):
    assert cli.main(["bench", "--iterations", "1"]) == 2


def test_cli_rejects_unknown_benchmark(capsys):
    assert cli.main(["bench", "--select", "nbody"]) == 2


def test_mismatch_fails_loudly(monkeypatch):
    monkeypatch.setattr(B, "benchmark_source", lambda n: "print_float (0.1 +. 0.2);;")
    real = B.time_once

    def skewed(src, backend, arena_size=B.DEFAULT_ARENA):
        t, out = real(src, backend, arena_size)
        return t, out + ("!" if backend == "jit" else "")

    monkeypatch.setattr(B, "time_once", skewed)
    with pytest.raises(B.BenchmarkFailure, match="differs"):
        B.run_benchmarks(["fib"], iterations=2)


def test_cli_bench_table(small_sieve, capsys, tmp_path):
    assert cli.main(["bench", "--select", "sieve", "--csv", str(tmp_path / "b.csv")]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].split() == ["benchmark", "backend", "iters", "best", "(s)", "speedup"]
    assert (tmp_path / "b.csv").exists()


@pytest.mark.parametrize("name", ["boyer-mini", "fft-mini", "nucleic-mini"])
def test_symbolic_and_float_benchmarks_agree(name):
    src = B.benchmark_source(name)
    jit = run_program(src, backend="jit")
    assert jit[1]
    assert jit == run_program(src, backend="interp")
