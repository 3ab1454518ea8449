import itertools
import json

import pytest
from hypothesis import given, strategies as st

from mapsep.analysis import analyze, join, leq, satisfies
from mapsep.bench import gen_benchmark
from mapsep.fuzz import random_program
from mapsep.instrument import instrument
from mapsep.ivl import IVLError, normalize, parse
from mapsep.ivl.ast import BOT, is_write
from mapsep.lastwrites import lastwrites_exact
from mapsep.semantics import FiniteConfig, reach

from conftest import corpus_files, load

HEADER = "var a, b : [int]int;\nvar i, j, k, x, y : int;\n"


def analysis_of(text):
    p = normalize(parse(HEADER + text))
    return p, analyze(instrument(p))


def writes(p):
    return {s.id for s in p.statements if is_write(s.cmd)}


def check_covers(p, n):
    pre = instrument(p)
    res = analyze(pre)
    lts = reach(pre, FiniteConfig(n))
    for s in lts.concrete_states():
        assert satisfies(res, lts.space, s), s.pc
    return res


@given(st.integers(0, 5_000))
def test_abstract_states_cover_reachable_states(seed):
    check_covers(normalize(random_program(seed, max_statements=6)), 2)


@pytest.mark.parametrize("path", corpus_files("unit", "fuzz-seeds"), ids=lambda p: p.stem)
def test_corpus_covered(path):
    check_covers(load(path), 2)


@given(st.integers(0, 5_000), st.sampled_from([2, 3]))
def test_overapproximates_lastwrites(seed, n):
    p = normalize(random_program(seed, max_statements=6))
    res = analyze(instrument(p))
    assert lastwrites_exact(p, FiniteConfig(n)) <= res.lastwrites


def test_fig1_preimages(fig1):
    res = analyze(instrument(fig1))
    w = {(s.cmd.target, s.cmd.expr.updates[0][0], s.cmd.expr.updates[0][1]): s.id for s in fig1.statements if is_write(s.cmd)}
    by_read = {}
    for r, (a, i) in res.reads.items():
        by_read.setdefault((a, i), set()).add(res.preimage[r])
    assert by_read[("mem", "p")] == {frozenset({w["mem", "p", "zero"], w["mem", "p", "t"]})}
    assert by_read[("mem", "q")] == {frozenset({w["mem", "q", "zero"], w["mem", "q", "t"]})}
    assert by_read[("valid", "q")] == {frozenset({w["valid", "p", "tru"], BOT})}
    assert by_read[("valid", "p")] == {frozenset({BOT})}


@pytest.mark.parametrize("k", [2, 4, 6, 10, 20])
def test_benchmark_pointers_pairwise_disequal(k):
    p = normalize(gen_benchmark(k))
    res = analyze(instrument(p))
    first = next(s for s in p.statements if is_write(s.cmd) and s.cmd.target == "mem")
    ps = [f"p{n}" for n in range(1, k + 1)]
    for x, y in itertools.combinations(ps, 2):
        assert res.disequal(first.src, x, y), (x, y)


def test_fig3_flow_sensitive(fig3):
    res = analyze(instrument(fig3))
    start = next(s for s in fig3.statements if s.src != fig3.initial and s.cmd.__class__.__name__ == "AssignBase"
                 and getattr(s.cmd.expr, "value", None) == 0 and s.cmd.target == "q")
    # before allocation p and q are known equal ...
    assert res.equal(start.dst, "p", "q")
    # ... and once mem is written they are known distinct
    first = next(s for s in fig3.statements if is_write(s.cmd) and s.cmd.target == "mem")
    assert res.disequal(first.src, "p", "q")
    mem_reads = {res.preimage[r] for r, (a, _) in res.reads.items() if a == "mem"}
    assert len(mem_reads) == 2 and not frozenset.intersection(*mem_reads)


def test_strong_update_kills_old_write():
    p, res = analysis_of("a[i] := x; a[i] := y; x := a[i];\n")
    r = p.statements[-1].id
    assert res.preimage[r] == {p.statements[1].id}


def test_weak_update_keeps_both():
    p, res = analysis_of("a[i] := x; a[j] := y; x := a[i];\n")
    assert res.preimage[p.statements[-1].id] == {p.statements[0].id, p.statements[1].id}


def test_disequality_separates():
    p, res = analysis_of("assume !(i == j); a[i] := x; a[j] := y; x := a[i];\n")
    assert res.preimage[p.statements[-1].id] == {p.statements[1].id}


def test_disjunctive_assume_keeps_common_facts():
    p, res = analysis_of("assume (i == j && !(i == k)) || (i == j && k == x); a[k] := y; a[j] := x; x := a[i];\n")
    assert res.preimage[p.statements[-1].id] == {p.statements[2].id}
    # facts that hold in only one disjunct are dropped
    p, res = analysis_of("assume i == j || i == k; a[j] := x; x := a[i];\n")
    assert res.preimage[p.statements[-1].id] == {p.statements[1].id, BOT}


def test_copy_transfers_history():
    p, res = analysis_of("a[i] := x; b := a; x := b[i]; havoc a; y := a[i];\n")
    assert res.preimage[p.statements[2].id] == {p.statements[0].id}
    assert res.preimage[p.statements[4].id] == {BOT}


def test_unreachable_read_has_empty_preimage():
    p, res = analysis_of("assume i == j; assume !(i == j); x := a[i];\n")
    assert res.preimage[p.statements[-1].id] == frozenset()


def test_requires_instrumented_program(fig1):
    with pytest.raises(IVLError) as ei:
        analyze(fig1)
    assert ei.value.code == "not-instrumented"


def test_join_is_upper_bound(fig1):
    res = analyze(instrument(fig1))
    u = res.universe
    states = [s for s in res.states.values() if s is not None]
    for s1, s2 in itertools.islice(itertools.combinations(states, 2), 80):
        j = join(u, s1, s2)
        assert leq(u, s1, j) and leq(u, s2, j)
        assert join(u, s1, s1) == s1
        assert join(u, s1, None) == s1


def test_result_json(fig1):
    doc = json.loads(analyze(instrument(fig1)).to_json())
    assert set(doc) == {"locations", "preimage", "lastwrites"}
    assert any("p != q" in f for f in doc["locations"]["l13"] or ())
