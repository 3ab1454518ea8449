import pytest
from hypothesis import given, strategies as st

from mapsep.fuzz import random_program
from mapsep.ivl import IVLError, normalize, parse, pretty
from mapsep.ivl.ast import (
    AssignBase,
    AssignMap,
    Assume,
    HavocMapsEqual,
    Not,
    Select,
    Seq,
    Store,
    check_well_formed,
    is_read,
    is_write,
)
from mapsep.ivl.normalize import needs_normalizing

from conftest import CORPUS, corpus_files


def codes(text, **kw):
    with pytest.raises(IVLError) as ei:
        parse(text, **kw)
    return ei.value.code


HEADER = "var a, b : [int]int;\nvar i, j, x, y : int;\n"


def test_fig1_shape(fig1):
    assert set(fig1.map_vars) == {"mem", "valid"}
    assert fig1.error_locs == ("err",)
    srcs = [s.src for s in fig1.statements]
    # the loop head has its two bodies and the exit as successors
    heads = [loc for loc in set(srcs) if srcs.count(loc) >= 3]
    assert len(heads) == 1
    back = [s for s in fig1.statements if s.dst == heads[0] and s.src != heads[0]]
    assert len(back) == 3  # entry plus two back edges


def test_assert_lowers_to_error_edge():
    p = parse(HEADER + "assume !(x == y);\nassert !(x == y);\n")
    err = [s for s in p.statements if s.dst == "err"]
    assert len(err) == 1
    assert isinstance(err[0].cmd, Assume) and isinstance(err[0].cmd.cond, Not)
    ok = [s for s in p.statements if s.src == err[0].src and s.dst != "err"]
    assert ok[0].cmd.cond == err[0].cmd.cond.arg


def test_statement_ids_follow_source_location():
    p = parse(HEADER + "if (*) { x := a[i]; } else { y := a[j]; }\n")
    for s in p.statements:
        assert s.id.startswith(s.src + "#")
    assert len({s.id for s in p.statements}) == len(p.statements)


@pytest.mark.parametrize(
    "body, code",
    [
        ("x := a[i];\nassume a == b;\n", "map-equality-assume"),
        ("x := c[i];\n", "undeclared-variable"),
        ("x := a;\n", "type-error"),
        ("a := x;\n", "type-error"),
        ("x := a[i]\n", "syntax"),
        ("x := 1 == y;\n", "syntax"),
    ],
)
def test_rejections(body, code):
    assert codes(HEADER + body) == code


def test_assume_snippet_file_rejected():
    with pytest.raises(IVLError) as ei:
        parse((CORPUS / "paper" / "assume_maps.mivl").read_text())
    assert ei.value.code == "map-equality-assume"
    assert ei.value.line == 5


def test_reserved_names():
    assert codes("var a-lw : [int]int;\n") == "reserved-name"
    assert codes("var a__x : [int]int;\n") == "reserved-name"
    assert codes("var x, x : int;\n") == "duplicate-declaration"


def test_strict_grammar_drops_arithmetic():
    text = HEADER + "x := succ(y);\n"
    assert parse(text).statements[0].cmd.expr.var == "y"
    assert codes(text, strict_grammar=True) == "strict-grammar"


def test_ir_constructs_need_ir_flag():
    text = HEADER + "family a : a, b;\ninit l0;\nlocs l0, l1;\nl0 -> l1 : havoc {a, b};\n"
    assert codes(text) == "ir-only-construct"
    p = parse(text, ir=True)
    assert isinstance(p.statements[0].cmd, HavocMapsEqual)
    assert p.families == (("a", ("a", "b")),)


def test_edge_form_errors():
    assert codes(HEADER + "init l0;\nlocs l0, l1;\nl1 -> l0 : skip;\n") == "edge-into-initial"
    assert codes(HEADER + "init l0;\nlocs l0, l1;\nl0 -> l7 : skip;\n") == "unknown-location"


def test_multi_store_is_split():
    p = parse(HEADER + "a := b[i := x][j := y];\n")
    assert any(needs_normalizing(s.cmd) for s in p.statements)
    q = normalize(p)
    assert not any(needs_normalizing(s.cmd) for s in q.statements)
    writes = [s.cmd for s in q.statements if is_write(s.cmd)]
    assert [w.expr.updates for w in writes] == [(("i", "x"),), (("j", "y"),)]
    assert all(isinstance(w.expr, Store) and w.expr.map == w.target for w in writes)


def test_normalize_is_idempotent(fig1):
    assert normalize(fig1) == fig1


@pytest.mark.parametrize("path", corpus_files("paper", "unit", "fuzz-seeds"), ids=lambda p: p.stem)
def test_corpus_roundtrip(path):
    p = parse(path.read_text())
    q = parse(pretty(p))
    assert q == p
    check_well_formed(q)


@given(st.integers(0, 10_000))
def test_printer_roundtrip_random(seed):
    p = random_program(seed)
    assert parse(pretty(p)) == p
    assert pretty(parse(pretty(p))) == pretty(p)


@given(st.integers(0, 10_000))
def test_normal_form_invariant(seed):
    p = normalize(random_program(seed))
    for s in p.statements:
        c = s.cmd
        assert not isinstance(c, Seq)
        if isinstance(c, AssignMap) and isinstance(c.expr, Store):
            assert c.expr.map == c.target and len(c.expr.updates) == 1
        assert is_read(c) == (isinstance(c, AssignBase) and isinstance(c.expr, Select))
