import struct

import pytest

from nml.errors import LinkError, Trap
from nml.jit.objcode import ObjectCode, Reloc, SymbolDef
from nml.linkrun import memory as M
from nml.linkrun.linker import (ExecutableImage, GlobalSymbolTable, apply_relocation,
                                link_object, read_back_target, relocation_value,
                                verify_relocations)
from nml.linkrun.runtime import PRIMITIVES, Runtime, header, read_float, rt

from conftest import CORPUS, corpus_source

MOV_RAX_1_RET = bytes.fromhex("48 C7 C0 01 00 00 00 C3")


@pytest.fixture
def runtime():
    out = []
    table = GlobalSymbolTable()
    r = Runtime(table, out.append, arena_size=1 << 20)
    r.out = out
    yield r
    r.close()


def mappings():
    """(start, end, perms) for every mapping of this process."""
    out = []
    with open("/proc/self/maps") as fh:
        for line in fh:
            span, perms = line.split()[:2]
            lo, hi = (int(x, 16) for x in span.split("-"))
            out.append((lo, hi, perms))
    return out


def perms_at(addr):
    (p,) = [p for lo, hi, p in mappings() if lo <= addr < hi]
    return p


# -- relocation arithmetic --------------------------------------------------------

class TestApplyRelocation:
    def test_rel32_example(self):
        r = Reloc("text", 0x20, "Rel32", "t", -4)
        field = apply_relocation(r, {"text": 0x7F0000001000}, 0x7F0000003000)
        assert field == struct.pack("<i", 0x1FDC)

    def test_abs64_example(self):
        r = Reloc("data", 0, "Abs64", "t", 0)
        assert apply_relocation(r, {"data": 0}, 0x7F0000002000) == bytes.fromhex("00 20 00 00 00 7F 00 00")

    def test_rel32_out_of_range(self):
        r = Reloc("text", 0, "Rel32", "far", 0)
        with pytest.raises(LinkError, match="out of range"):
            apply_relocation(r, {"text": 0}, 1 << 31)

    def test_rel32_last_in_range(self):
        r = Reloc("text", 0, "Rel32", "far", 0)
        assert relocation_value(r, {"text": 0}, (1 << 31) - 1) == (1 << 31) - 1
        assert relocation_value(r, {"text": 1 << 31}, 0) == -(1 << 31)

    @pytest.mark.parametrize("kind,addend", [("Rel32", -4), ("Rel32", 12), ("Abs64", 0), ("Abs64", 16)])
    def test_read_back_inverts(self, kind, addend):
        r = Reloc("text", 0x44, kind, "t", addend)
        bases = {"text": 0x7F12_3456_0000}
        target = 0x7F12_3456_9A10
        assert read_back_target(r, bases, apply_relocation(r, bases, target)) == target


# -- linking ---------------------------------------------------------------------

class TestLink:
    def test_no_reloc_object(self, runtime):
        table = runtime.table
        before = table.names()
        obj = ObjectCode(MOV_RAX_1_RET, b"", (), (SymbolDef("nml_phrase1_entry", "text", 0, True),), ())
        img, t2 = link_object(obj, table)
        assert t2 is table
        assert table.names() - before == {"nml_phrase1_entry"}
        assert img.sealed
        assert img.text_base % M.PAGE == 0
        assert runtime.call(table.lookup("nml_phrase1_entry")) == 1

    def test_runtime_symbols_preseeded(self, runtime):
        for name in PRIMITIVES:
            assert rt(name) in runtime.table
        assert all(n.startswith("nml_rt_") for n in runtime.table.names())

    def test_call_lands_on_primitive(self, runtime):
        # mov edi, 2; xor esi, esi; call nml_rt_alloc; ret  (alloc(2, tag 0))
        text = bytes.fromhex("BF 02 00 00 00 31 F6 E8 CC CC CC CC C3")
        obj = ObjectCode(text, b"", (Reloc("text", 8, "Rel32", "nml_rt_alloc", -4),),
                         (SymbolDef("nml_phrase7_entry", "text", 0, True),), ("nml_rt_alloc",))
        img, _ = link_object(obj, runtime.table)
        disp = struct.unpack("<i", M.read(img.text_base + 8, 4))[0]
        assert img.text_base + 12 + disp == runtime.table.lookup("nml_rt_alloc")
        assert verify_relocations(obj, img, runtime.table) == []
        p = runtime.call(img.symbols["nml_phrase7_entry"])
        assert header(p) == (2, 0)

    def test_cross_phrase_data_symbol(self, runtime):
        table = runtime.table
        slot = ObjectCode(b"", struct.pack("<Q", 85), (),
                          (SymbolDef("nml_phrase1_x", "data", 0, True),), ())
        link_object(slot, table)
        # movabs rax, nml_phrase1_x; mov rax, [rax]; ret
        text = bytes.fromhex("48 B8") + bytes(8) + bytes.fromhex("48 8B 00 C3")
        user = ObjectCode(text, b"", (Reloc("text", 2, "Abs64", "nml_phrase1_x", 0),),
                          (SymbolDef("nml_phrase2_entry", "text", 0, True),), ("nml_phrase1_x",))
        img, _ = link_object(user, table)
        assert runtime.call(img.symbols["nml_phrase2_entry"]) == 85

    def test_unresolved_symbol_named(self, runtime):
        obj = ObjectCode(bytes(10), b"", (Reloc("text", 2, "Abs64", "nml_phrase9_nope", 0),),
                         (), ("nml_phrase9_nope",))
        before = runtime.table.names()
        with pytest.raises(LinkError, match="nml_phrase9_nope"):
            link_object(obj, runtime.table)
        assert runtime.table.names() == before

    def test_duplicate_definition_rejected(self):
        t = GlobalSymbolTable()
        t.define("a", 1)
        with pytest.raises(LinkError):
            t.define("a", 2)
        assert t.lookup("a") == 1


class TestWriteThenExecute:
    def test_seal_is_one_way(self, runtime):
        obj = ObjectCode(MOV_RAX_1_RET, bytes(8), (),
                         (SymbolDef("nml_phrase3_entry", "text", 0, True),), ())
        img, _ = link_object(obj, runtime.table)
        assert img.state == "sealed"
        with pytest.raises(LinkError):
            img.patch("text", 0, b"\x90")
        with pytest.raises(LinkError):
            img.seal()
        img.patch("data", 0, b"\x01")  # data stays writable

    def test_page_permissions(self, runtime):
        obj = ObjectCode(MOV_RAX_1_RET, bytes(8), (),
                         (SymbolDef("nml_phrase4_entry", "text", 0, True),
                          SymbolDef("nml_phrase4_v", "data", 0, True)), ())
        img, _ = link_object(obj, runtime.table)
        text = perms_at(img.text_base)
        assert text.startswith("r-x")
        assert perms_at(img.data_base).startswith("rw-")

    def test_no_writable_executable_mapping(self, session):
        s = session()
        for k in range(20):
            assert s.eval(f"let f{k} x = x + {k};;").ok
        # libffi's callback trampolines are its own business; our pools must be W^X
        pools = [(M.text_pool().base, M.text_pool().base + M.text_pool().size),
                 (M.data_pool().base, M.data_pool().base + M.data_pool().size),
                 (s.runtime.arena_base, s.runtime.arena_base + s.runtime.arena_size),
                 (s.runtime.stack_base, s.runtime.stack_base + s.runtime.stack_size)]
        ours = [m for m in mappings() if any(lo <= m[0] < hi for lo, hi in pools)]
        assert ours
        assert not [m for m in ours if "w" in m[2] and "x" in m[2]]

    def test_image_starts_writable(self):
        img = ExecutableImage(0, 0, 0, 0)
        assert img.state == "writable" and not img.sealed


# -- execution -------------------------------------------------------------------

def native_value(session, src):
    s = session(keep_objects=True)
    r = s.eval(src)
    return s, r


class TestExecute:
    def test_unit_is_one(self, session):
        s = session(keep_objects=True)
        assert s.eval("();;").ok
        _, img = s.linked[-1]
        assert s.runtime.call(img.symbols["nml_phrase1_entry"]) == 1

    def test_divide_by_zero_report(self, session):
        s = session(keep_objects=True)
        r = s.eval("1/0;;")
        assert r.status == "trap"
        assert r.text == "Runtime error: division by zero\n"
        _, img = s.linked[-1]
        with pytest.raises(Trap) as e:
            s.runtime.call(img.symbols["nml_phrase1_entry"])
        assert e.value.kind == "divide-by-zero"

    def test_root_let_stores_tagged_value(self, session):
        s = session(keep_objects=True)
        assert s.eval("let x = 21*2;;").text == "val x : int = 42\n"
        _, img = s.linked[-1]
        assert M.read_word(s.table.lookup("nml_phrase1_x")) == 85
        assert s.runtime.call(img.symbols["nml_phrase1_entry"]) == 85

    def test_bounds_report(self, session):
        s = session(keep_objects=True)
        s.eval("let a = [|1; 2|];;")
        assert s.eval("a.(9);;").text == "Runtime error: index out of bounds\n"
        _, img = s.linked[-1]
        with pytest.raises(Trap) as e:
            s.runtime.call(img.symbols["nml_phrase2_entry"])
        assert e.value.kind == "bounds"

    def test_session_survives_trap(self, session):
        s = session()
        assert s.eval("1/0;;").status == "trap"
        assert s.eval("20 + 22;;").text == "- : int = 42\n"

    def test_deep_recursion_traps_cleanly(self, session):
        s = session()
        r = s.eval("let rec f n = 1 + f (n + 1) in f 0;;")
        assert r.text == "Runtime error: stack overflow\n"
        assert s.eval("1;;").ok


class TestAlloc:
    def test_bump_by_header_plus_fields(self, runtime):
        a = runtime.rt_alloc(2, 0)
        b = runtime.rt_alloc(2, 0)
        assert b - a == 24
        assert header(a) == (2, 0)

    def test_exhaustion_boundary(self, runtime):
        arena = runtime.arena
        left = (arena.limit - arena.next) // 8
        with pytest.raises(Trap) as e:
            runtime.rt_alloc(left, 0)  # needs left + 1 words with the header
        assert e.value.kind == "out-of-memory"
        p = runtime.rt_alloc(left - 1, 0)  # exactly fills the arena
        assert arena.next == arena.limit and header(p) == (left - 1, 0)

    def test_boxed_float(self, runtime):
        p = runtime.rt_alloc(1, 253)
        M.write(p, struct.pack("<d", 1.5))
        assert header(p) == (1, 253) and read_float(p) == 1.5

    def test_arena_invariants(self, runtime):
        arena = runtime.arena
        seen = []
        for words in (1, 5, 3, 1, 8):
            p = runtime.rt_alloc(words, 0)
            assert arena.base <= arena.next <= arena.limit and arena.next % 8 == 0
            seen.append((p - 8, p + 8 * words))
        seen.sort()
        assert all(a[1] <= b[0] for a, b in zip(seen, seen[1:]))

    def test_oom_from_generated_code(self, session):
        s = session(arena_size=1 << 20)
        r = s.eval("array_make 200000 0;;")
        assert r.text == "Runtime error: heap arena exhausted\n"
        assert s.eval("(1, 2);;").text == "- : int * int = (1, 2)\n"


# -- session-level properties ---------------------------------------------------

def test_symbol_table_monotonic(session):
    s = session()
    prev = s.table.names() if s.runtime else frozenset()
    for src in ["let a = 1;;", "let f x = x + a;;", "1/0;;", "let b = f 2;;", "let c = b;;",
                "let a = 2.5;;", "bogus;;"]:
        s.eval(src)
        now = s.table.names()
        assert prev <= now
        prev = now
    assert "nml_phrase1_a" in prev and "nml_phrase6_a" in prev


def test_every_corpus_link_round_trips(session):
    count = 0
    for name in CORPUS:
        s = session(keep_objects=True)
        s.run_text(corpus_source(name), stop_on_error=False)
        for obj, img in s.linked:
            assert verify_relocations(obj, img, s.table) == [], name
            count += len(obj.relocs)
    assert count > 1000


def test_thousand_traps(session):
    s = session(arena_size=1 << 20)
    s.eval("let a = [|1; 2|];;")
    s.eval("let z = 0;;")
    traps = ["a.(9);;", "1 / z;;", "5 mod z;;", "a.(0 - 1) <- 3;;", "array_make 1000000 0;;"]
    for k in range(1000):
        r = s.eval(traps[k % len(traps)])
        assert r.status == "trap"
    assert s.eval("a.(0) + a.(1);;").text == "- : int = 3\n"
