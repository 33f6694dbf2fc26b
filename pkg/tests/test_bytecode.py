import pytest

from nml.bytecode.compile import compile_bytecode
from nml.bytecode.instr import OP, OPCODES, dump
from nml.bytecode.vm import run_bytecode
from nml.errors import Trap
from nml.frontend.infer import TypeEnv, infer_phrase
from nml.frontend.parser import parse_phrase
from nml.lam import ir as L
from nml.lam.simplify import simplify
from nml.lam.translate import translate

from conftest import CORPUS, corpus_source, run_all


def program(src: str):
    env = TypeEnv.initial()
    tp, _ = infer_phrase(env, parse_phrase(src), lambda n: "g_" + n)
    return compile_bytecode(simplify(translate(tp, env)))


def run(src: str, globals_=None, out=None):
    p = program(src)
    p.validate()
    return run_bytecode(p, {} if globals_ is None else globals_,
                        (out if out is not None else []).append, check_balance=True)


def ops(p):
    return [OPCODES[op] for op, _ in p.code]


def test_add_runs_to_three():
    p = compile_bytecode(L.Prim("ADDINT", (L.ConstInt(1), L.ConstInt(2))))
    assert ops(p)[-1] == "STOP"
    assert run_bytecode(p, {}, check_balance=True) == 3


def test_identity_closure_body():
    p = compile_bytecode(L.Fun((1,), L.Var(1)))
    (op, (label, ncap)), = [(o, a) for o, a in p.code if OPCODES[o] == "CLOSURE"]
    body = p.code[label - p.base:]
    assert [OPCODES[o] for o, _ in body[:2]] == ["ACC", "RETURN"]
    assert ncap == 0


def test_while_false_exits_on_first_test():
    p = compile_bytecode(L.While(L.ConstInt(0), L.Prim("PRINTINT", (L.ConstInt(9),))))
    out = []
    assert run_bytecode(p, {}, out.append, check_balance=True) == 0
    assert out == []
    first_branch = next(i for i, (o, _) in enumerate(p.code) if o in (OP["BRANCHIFNOT"], OP["BRANCH"]))
    o, target = p.code[first_branch]
    assert OPCODES[o] == "BRANCHIFNOT"
    assert target > first_branch  # forward, straight past the body


def test_bounds_trap():
    with pytest.raises(Trap) as e:
        run("array_get [|1; 2|] 5;;")
    assert e.value.kind == "bounds"


def test_negative_index_traps():
    with pytest.raises(Trap):
        run("let a = [|1; 2|] in a.(0 - 1);;")


def test_local_function_call():
    assert run("let f x = x * 2 in f 21;;") == 42


def test_division_by_zero_traps():
    with pytest.raises(Trap) as e:
        run("let z = 0 in 1 / z;;")
    assert e.value.kind == "divide-by-zero"


def test_root_let_sets_global():
    g = {}
    assert run("let answer = 6 * 7;;", g) is not None
    assert g["g_answer"] == 42


def test_print_order_follows_program_order():
    out = []
    run("print_int 1; print_string \"-\"; print_int 2;;", out=out)
    assert "".join(out) == "1-2"


def test_right_to_left_arguments():
    out = []
    run("let f a b = a + b in f (print_int 1; 1) (print_int 2; 2);;", out=out)
    assert "".join(out) == "21"


def test_stack_overflow_is_a_trap():
    p = program("let rec f n = 1 + f (n + 1) in f 0;;")
    with pytest.raises(Trap) as e:
        run_bytecode(p, {}, max_stack=10_000)
    assert e.value.kind == "stack-overflow"


def test_dump_numbers_instructions():
    text = dump(program("if 1 < 2 then 3 else 4;;"))
    lines = text.splitlines()
    assert lines and all(line[:6].strip().lstrip("*").strip().isdigit() for line in lines)


def test_labels_resolve():
    program("let rec go i = if i > 3 then i else go (i + 1) in go 0;;").validate()


def test_deterministic_compile_and_run():
    src = "let a = array_make 5 0 in for i = 0 to 4 do a.(i) <- i * i done; a.(3) + a.(4);;"
    assert program(src).code == program(src).code
    assert run(src) == run(src) == 25


@pytest.mark.parametrize("name", ["loops.ml", "closures.ml", "sort.ml", "recursion.ml"])
def test_corpus_runs_twice_identically(name):
    src = corpus_source(name)
    assert run_all(src, backend="interp") == run_all(src, backend="interp")


def test_stack_balanced_on_corpus(monkeypatch):
    """Every successful corpus phrase leaves an empty operand stack at STOP."""
    from nml.toplevel import session as session_mod

    seen = []

    def checked(prog, g, write=None, **kw):
        seen.append(prog)
        return run_bytecode(prog, g, write, check_balance=True, **kw)

    monkeypatch.setattr(session_mod, "run_bytecode", checked)
    for name in CORPUS:
        run_all(corpus_source(name), backend="interp")  # imbalance raises AssertionError
    assert len(seen) > 100
