import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nml.frontend.infer import TypeEnv, infer_phrase
from nml.frontend.lexer import split_phrases
from nml.frontend.parser import parse_phrase
from nml.lam.simplify import simplify
from nml.lam.translate import translate
from nml.nativegen import cmm as C
from nml.nativegen import linscan
from nml.nativegen.clambda import DirectCall, EnvField, IndirectCall, closure_convert, free_of_function
from nml.nativegen.cmmgen import generate_cmm
from nml.nativegen.comballoc import allocation_runs, combine_allocations
from nml.nativegen.linearize import linearize, reconstruct_cfg
from nml.nativegen.linscan import allocate_registers, linear_scan
from nml.nativegen.liveness import LiveInterval, compute_live_intervals
from nml.nativegen.mach import Addr, Block, Instr, MachFn, VReg
from nml.nativegen.pipeline import NativeOptions, compile_native
from nml.nativegen.selection import select_instructions

from conftest import CORPUS, corpus_source


def lam(src: str):
    env = TypeEnv.initial()
    tp, _ = infer_phrase(env, parse_phrase(src), lambda n: "nml_phrase1_" + n)
    return simplify(translate(tp, env)), [b.symbol for b in tp.bindings]


def clam(src: str):
    return closure_convert(lam(src)[0], "nml_phrase1")


def nodes(e):
    stack = [e]
    while stack:
        x = stack.pop()
        yield x
        if hasattr(x, "__dataclass_fields__"):
            for k in x.__dataclass_fields__:
                v = getattr(x, k)
                for y in (v if isinstance(v, tuple) else (v,)):
                    stack.extend(y if isinstance(y, tuple) else (y,))


def fn(blocks, order=None):
    bs = {b.label: b for b in blocks}
    return MachFn("t", bs, order or [b.label for b in blocks])


def v(i, cls="i"):
    return VReg(i, cls)


# -- closure conversion ----------------------------------------------------------

class TestClosureConversion:
    def test_known_saturated_call_is_direct(self):
        p = clam("let f x = x in f 1;;")
        calls = [n for n in nodes(p.body) if isinstance(n, DirectCall)]
        assert len(calls) == 1 and calls[0].label == p.functions[0].label
        assert not any(isinstance(n, IndirectCall) for n in nodes(p.body))

    def test_capture_reads_environment(self):
        p = clam("fun x -> (print_int 0; fun y -> x);;")
        inner = p.functions[1]
        assert isinstance(inner.body, EnvField)
        assert inner.body.index == 1  # first field after the code pointer
        assert inner.free == (p.functions[0].params[0],)

    def test_unknown_callee_is_indirect(self):
        p = clam("fun g -> g 3;;")
        (call,) = [n for n in nodes(p.functions[0].body) if isinstance(n, IndirectCall)]
        assert call.args[0].value == 3

    @pytest.mark.parametrize("name", CORPUS)
    def test_no_free_variables(self, name):
        env = TypeEnv.initial()
        phrases, _ = split_phrases(corpus_source(name))
        for k, p in enumerate(phrases, 1):
            if p.lstrip().startswith("#"):
                continue
            try:
                tp, env2 = infer_phrase(env, parse_phrase(p), lambda n: f"nml_phrase{k}_{n}")
            except Exception:
                continue
            cl = closure_convert(simplify(translate(tp, env)), f"nml_phrase{k}")
            for f in cl.functions:
                assert free_of_function(f) == set(), (name, f.label)
            env = env2


# -- cmm generation --------------------------------------------------------------

class TestCmmgen:
    def entry_body(self, src):
        l, g = lam(src)
        prog = generate_cmm(closure_convert(l, "nml_phrase1"), 1, g)
        return prog, next(f for f in prog.functions if f.name == "nml_phrase1_entry").body

    def test_int_is_tagged(self):
        _, body = self.entry_body("5;;")
        assert body == C.CConst(11)

    def test_float_literal_is_boxed_data(self):
        prog, body = self.entry_body("1.5;;")
        (lit,) = [d for d in prog.data if isinstance(d, C.FloatLit)]
        assert lit.value == 1.5
        assert isinstance(body, C.CAlloc) and body.tag == 253
        assert body.fields == (C.CLoad(C.CSym(lit.label), "float64"),)

    def test_global_slot_per_root_binding(self):
        prog, _ = self.entry_body("let (a, b) = (1, 2);;")
        slots = sorted(d.label for d in prog.data if isinstance(d, C.GlobalSlot))
        assert slots == ["nml_phrase1_a", "nml_phrase1_b"]

    def test_entry_takes_no_arguments(self):
        prog, _ = self.entry_body("();;")
        entry = next(f for f in prog.functions if f.name == "nml_phrase1_entry")
        assert entry.params == () and entry.global_


MASK = (1 << 64) - 1


def tag(n):
    return (2 * n + 1) & MASK


def signed(w):
    return w - (1 << 64) if w >> 63 else w


small = st.integers(-(1 << 40), 1 << 40)


@given(small, small)
def test_tagged_add_rule(a, b):
    assert (tag(a) + tag(b) - 1) & MASK == tag(a + b)


@given(small, small)
def test_tagged_sub_rule(a, b):
    assert (tag(a) - tag(b) + 1) & MASK == tag(a - b)


@given(st.integers(-(1 << 30), 1 << 30), st.integers(-(1 << 30), 1 << 30))
def test_tagged_mul_rule(a, b):
    assert ((tag(a) - 1) * (signed(tag(b)) >> 1) + 1) & MASK == tag(a * b)


@given(small, small)
def test_tagged_compare_preserves_order(a, b):
    assert (signed(tag(a)) < signed(tag(b))) == (a < b)


def trunc_div(a, b):
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


@settings(max_examples=150, deadline=None)
@given(st.integers(-(1 << 61), 1 << 61), st.integers(-(1 << 61), 1 << 61).filter(lambda x: x != 0))
def test_native_arithmetic_matches_reference(session_factory, a, b):
    s = session_factory()
    got = s.eval(f"ops ({a}) ({b});;").text
    wrap = lambda n: ((n + (1 << 62)) % (1 << 63)) - (1 << 62)
    q = trunc_div(a, b)
    want = (f"- : int * int * int * int * int * bool * bool = ({wrap(a + b)}, {wrap(a - b)}, "
            f"{wrap(a * b)}, {q}, {a - b * q}, {'true' if a < b else 'false'}, "
            f"{'true' if a == b else 'false'})\n")
    assert got == want


@pytest.fixture(scope="module")
def session_factory():
    from nml.toplevel.session import Session
    s = Session()
    s.eval("let ops a b = (a + b, a - b, a * b, a / b, a mod b, a < b, a = b);;")
    yield lambda: s
    s.close()


# -- instruction selection -------------------------------------------------------

class TestSelection:
    def test_constant_add(self):
        f = select_instructions(C.CmmFunction("t", (), None, C.COp("add", (C.CConst(2), C.CConst(3)))))
        body = f.blocks[f.order[0]].body
        assert any(i.op == "const" and i.a == 2 for i in body)
        last = body[-1]
        assert (last.op, last.a) in (("lea", Addr(1, 3)), ("iop", ("add", 3)))

    def test_symbol_load(self):
        f = select_instructions(C.CmmFunction("t", (), None, C.CLoad(C.CSym("s"))))
        body = f.blocks[f.order[0]].body
        sym, load = body[-2], body[-1]
        assert sym.op == "sym" and sym.a == "s"
        assert load.op == "load" and load.s == (sym.d[0],)

    def test_if_makes_diamond(self):
        cond = C.COp("cmp", (C.CVar(1), C.CConst(7)), "l")
        body = C.CIf(cond, C.CConst(3), C.CConst(5))
        f = select_instructions(C.CmmFunction("t", (1,), None, body))
        f.validate()
        entry = f.blocks[f.order[0]]
        assert entry.term.op == "cbr"
        yes, no = entry.term.successors()
        assert f.successors(yes) == f.successors(no) and len(f.successors(yes)) == 1

    def test_indexed_load_folds_addressing(self):
        l, g = lam("fun a i -> a.(i);;")
        unit = compile_native(l, 1, g)
        text = unit.dump("mach")
        assert "load [v" in text and "*4-4]" in text


# -- allocation combining --------------------------------------------------------

def alloc(d, words, tag=0):
    return Instr("alloc", (d,), (), ((0, words, tag),))


class TestComballoc:
    def test_two_allocations_merge(self):
        b = Block(1, [alloc(v(1), 2), alloc(v(2), 3)], Instr("ret", s=(v(2),)))
        f = combine_allocations(fn([b]))
        first, second = f.blocks[1].body
        assert first.op == "alloc" and sum(w + 1 for _, w, _ in first.a) == 7
        assert second.op == "lea" and second.s == (v(1),) and second.a.disp == 3 * 8
        assert first.a[1][0] == 3 * 8

    def test_call_is_a_barrier(self):
        call = Instr("call", (v(9),), (), ("g", False))
        body = [alloc(v(1), 2), call, alloc(v(2), 3)]
        f = combine_allocations(fn([Block(1, list(body), Instr("ret", s=(v(2),)))]))
        assert [i.op for i in f.blocks[1].body] == ["alloc", "call", "alloc"]

    def test_single_allocation_unchanged(self):
        body = [alloc(v(1), 4, 247)]
        f = combine_allocations(fn([Block(1, list(body), Instr("ret", s=(v(1),)))]))
        assert f.blocks[1].body[0].a == ((0, 4, 247),)

    def test_tuple_of_tuples_is_one_call(self):
        l, g = lam("fun x -> (x, (x, 2.5), [|x|]);;")
        seen = []
        compile_native(l, 1, g, on_mach=seen.append)
        assert all(n <= 1 for f in seen for n in allocation_runs(f))
        assert sum(i.op == "alloc" for f in seen for b in f.layout() for i in b.body) >= 1


# -- liveness --------------------------------------------------------------------

def straight():
    body = [Instr("getargs", (), (), False),
            Instr("const", (v(0),), (), 5),
            Instr("const", (v(9),), (), 8),
            Instr("iop", (v(1),), (v(0),), ("add", 2))]
    return fn([Block(1, body, Instr("ret", s=(v(1),)))])


def interval(ivs, reg):
    (iv,) = [i for i in ivs if i.vreg == reg]
    return iv.start, iv.end


def instr_liveness(f):
    """Per-position live-in sets by fixpoint over single instructions."""
    pos, succ, ins = {}, {}, []
    k = 0
    first = {}
    for b in f.layout():
        first[b.label] = k
        for i in b.instrs():
            ins.append(i)
            k += 1
    k = 0
    for b in f.layout():
        items = list(b.instrs())
        for j, i in enumerate(items):
            if j + 1 < len(items):
                succ[k] = [k + 1]
            else:
                succ[k] = [first[t] for t in i.successors()]
            k += 1
    live = [set() for _ in ins]
    changed = True
    while changed:
        changed = False
        for p in reversed(range(len(ins))):
            out = set().union(*(live[q] for q in succ[p])) if succ[p] else set()
            new = {x for x in ins[p].s if isinstance(x, VReg)} | (out - {x for x in ins[p].d})
            if new != live[p]:
                live[p] = new
                changed = True
    return ins, live


def loop_fn():
    # L1: v0 <- 7; i <- 0; jmp L2 / L2: if i < 10 -> L3 else L4 / L3: i <- i + v0; jmp L2 / L4: ret i
    b1 = Block(1, [Instr("getargs", (), (), False), Instr("const", (v(0),), (), 7),
                   Instr("const", (v(1),), (), 0)], Instr("jmp", a=2))
    b2 = Block(2, [], Instr("cbr", (), (v(1),), ("l", 10, 3, 4)))
    b3 = Block(3, [Instr("iop", (v(1),), (v(1), v(0)), ("add", None))], Instr("jmp", a=2))
    b4 = Block(4, [], Instr("ret", s=(v(1),)))
    return fn([b1, b2, b3, b4])


class TestLiveness:
    def test_straight_line(self):
        ivs = compute_live_intervals(straight())
        assert interval(ivs, v(0)) == (1, 3)

    def test_dead_definition(self):
        ivs = compute_live_intervals(straight())
        assert interval(ivs, v(9)) == (2, 2)

    def test_sorted_by_start(self):
        ivs = compute_live_intervals(loop_fn())
        assert [i.start for i in ivs] == sorted(i.start for i in ivs)

    def test_value_live_through_loop(self):
        f = loop_fn()
        ivs = compute_live_intervals(f)
        last_loop_index = 3 + 1 + 1  # L1 has 4 positions, L2 one, L3 two
        assert interval(ivs, v(0))[1] >= last_loop_index

    def test_intervals_cover_dataflow_liveness(self):
        f = loop_fn()
        ivs = compute_live_intervals(f)
        ins, live = instr_liveness(f)
        for p, s in enumerate(live):
            for reg in s | {x for x in ins[p].d if isinstance(x, VReg)}:
                lo, hi = interval(ivs, reg)
                assert lo <= p <= hi

    @pytest.mark.parametrize("name", ["loops.ml", "sort.ml", "matrix.ml", "while_loops.ml"])
    def test_corpus_intervals_cover_dataflow(self, name):
        for f in corpus_mach(name):
            ivs = compute_live_intervals(f)
            ins, live = instr_liveness(f)
            spans = {i.vreg: (i.start, i.end) for i in ivs}
            for p, s in enumerate(live):
                for reg in s:
                    lo, hi = spans[reg]
                    assert lo <= p <= hi


def corpus_mach(name, **opts):
    """Pre-allocation Mach functions of every phrase in a corpus file."""
    from nml.toplevel import session as S

    seen = []
    real = S.compile_native

    def hook(*a, **kw):
        return real(*a, **kw, on_mach=lambda m: seen.append(_copy(m)))

    S.compile_native = hook
    try:
        s = S.Session(S.SessionConfig(**opts))
        s.run_text(corpus_source(name), stop_on_error=False)
        s.close()
    finally:
        S.compile_native = real
    assert seen, name
    return seen


def _copy(m):
    blocks = {k: Block(b.label, list(b.body), b.term) for k, b in m.blocks.items()}
    return MachFn(m.name, blocks, list(m.order), m.global_, m.frame_slots)


# -- linear scan -----------------------------------------------------------------

class Iv:
    def __init__(self, name, start, end):
        self.name, self.start, self.end = name, start, end

    def __repr__(self):
        return f"{self.name}[{self.start},{self.end}]"


def overlap(a, b):
    return a.start <= b.end and b.start <= a.end


def max_overlap(ivs):
    points = {p for i in ivs for p in (i.start, i.end)}
    return max((sum(i.start <= p <= i.end for i in ivs) for p in points), default=0)


def min_spills(ivs, k):
    """Smallest number of intervals to drop so the rest is k-colourable."""
    for n in range(len(ivs) + 1):
        for drop in itertools.combinations(ivs, n):
            rest = [i for i in ivs if i not in drop]
            if max_overlap(rest) <= k:
                return n
    return len(ivs)


class TestLinearScan:
    def test_reuse_after_expiry(self):
        v1, v2, v3 = Iv("v1", 1, 10), Iv("v2", 2, 4), Iv("v3", 5, 9)
        assert max_overlap([v1, v2, v3]) == 2  # brute force: 2-colourable
        assignment, spilled = linear_scan([v1, v2, v3], 2)
        assert not spilled
        assert assignment[v3] == assignment[v2] != assignment[v1]

    def test_spill_furthest_end(self):
        v1, v2, v3 = Iv("v1", 1, 10), Iv("v2", 2, 8), Iv("v3", 3, 6)
        assert min_spills([v1, v2, v3], 2) == 1
        assignment, spilled = linear_scan([v1, v2, v3], 2)
        assert spilled == {v1}
        assert {assignment[v2], assignment[v3]} == {0, 1}

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_single_interval(self, k):
        only = Iv("v", 3, 7)
        assert linear_scan([only], k) == ({only: 0}, set())


def check_sound(ivs, assignment, spilled):
    assert set(assignment) | spilled == set(ivs)
    assert not set(assignment) & spilled
    for a, b in itertools.combinations(assignment, 2):
        if assignment[a] == assignment[b]:
            assert not overlap(a, b), (a, b)


def test_linear_scan_random_sound():
    """1000 random interval sets, up to 64 intervals, 2 to 12 registers."""
    rng = random.Random(20111)
    for trial in range(1000):
        n = rng.randint(1, 64)
        k = rng.randint(2, 12)
        ivs = []
        for j in range(n):
            s = rng.randint(0, 200)
            ivs.append(Iv(f"v{j}", s, s + rng.randint(0, 80)))
        assignment, spilled = linear_scan(ivs, k)
        check_sound(ivs, assignment, spilled)
        assert all(0 <= r < k for r in assignment.values())
        if max_overlap(ivs) <= k:
            assert not spilled, trial


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 40)), min_size=1, max_size=64),
       st.integers(2, 12))
def test_linear_scan_sound_property(spans, k):
    ivs = [Iv(f"v{j}", s, s + d) for j, (s, d) in enumerate(spans)]
    check_sound(ivs, *linear_scan(ivs, k))


def test_allocator_output_sound_on_corpus(monkeypatch):
    calls = []
    real = linscan.linear_scan

    def spy(ivs, k):
        out = real(ivs, k)
        check_sound(list(ivs), *out)
        calls.append(len(ivs))
        return out

    monkeypatch.setattr(linscan, "linear_scan", spy)
    for name in ["register_pressure.ml", "float_loops.ml", "matrix.ml"]:
        corpus_mach(name)
    assert calls and max(calls) > 5


def test_spill_all_uses_only_slots():
    f = loop_fn()
    allocate_registers(f, compute_live_intervals(f), "spill_all")
    assert f.frame_slots == 2


# -- linearization ---------------------------------------------------------------

def diamond():
    return fn([Block(1, [Instr("getargs", (v(0),), (), False)], Instr("cbr", (), (v(0),), ("l", 3, 2, 3))),
               Block(2, [Instr("const", (v(1),), (), 1)], Instr("jmp", a=4)),
               Block(3, [Instr("const", (v(1),), (), 2)], Instr("jmp", a=4)),
               Block(4, [], Instr("ret", s=(v(1),)))])


def succ_map(f):
    return {b: sorted(set(f.successors(b))) for b in f.order}


class TestLinearize:
    def test_diamond_single_jump(self):
        f = diamond()
        allocate_registers(f, compute_live_intervals(f))
        lin = linearize(f)
        assert lin.labels() == [1, 2, 3, 4]
        assert sum(i.op == "jmp" for i in lin.instrs) == 1
        assert sum(i.op == "condjump" for i in lin.instrs) == 1

    def test_single_block_has_no_branches(self):
        f = straight()
        allocate_registers(f, compute_live_intervals(f))
        lin = linearize(f)
        assert not any(i.op in ("jmp", "condjump") for i in lin.instrs)
        lin.validate()

    def test_loop_back_edge_is_conditional(self):
        f = loop_fn()
        f.order = [1, 3, 2, 4]  # body before the test, as selection lays out loops
        allocate_registers(f, compute_live_intervals(f))
        lin = linearize(f)
        pos = {i.a: k for k, i in enumerate(lin.instrs) if i.op == "label"}
        back = [k for k, i in enumerate(lin.instrs) if i.op == "condjump" and pos[i.a[2]] < k]
        assert back

    def test_frame_keeps_calls_aligned(self):
        for slots in range(6):
            f = straight()
            allocate_registers(f, compute_live_intervals(f))
            lin = linearize(f)
            lin.frame_slots = slots
            assert lin.frame_size % 16 == 8

    @pytest.mark.parametrize("src", [
        "let f x = if x > 3 then x else 0 - x;;",
        "let g n = let t = [|0|] in while t.(0) < n do t.(0) <- t.(0) + 1 done; t.(0);;",
        "let h a = let s = [|0|] in for i = 0 to array_length a - 1 do "
        "if a.(i) > 0 then s.(0) <- s.(0) + a.(i) done; s.(0);;",
    ])
    def test_cfg_reconstructed(self, src):
        l, g = lam(src)
        seen = []
        unit = compile_native(l, 1, g, on_mach=seen.append)
        for m, lin in zip(seen, unit.linear):
            assert reconstruct_cfg(lin) == succ_map(m)


@pytest.mark.parametrize("name", ["loops.ml", "sort.ml", "mutual.ml", "traps.ml"])
def test_cfg_reconstructed_on_corpus(name, monkeypatch):
    from nml.nativegen import pipeline

    pairs = []
    real = pipeline.linearize

    def spy(m):
        lin = real(m)
        pairs.append((succ_map(m), reconstruct_cfg(lin)))
        return lin

    monkeypatch.setattr(pipeline, "linearize", spy)
    corpus_mach(name)
    assert pairs
    for want, got in pairs:
        assert got == want


def test_options_default_linear():
    assert NativeOptions() == NativeOptions("linear", True)
