import json
import os
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapsep import _kernels
from mapsep.bench import run_pipeline
from mapsep.equiv import (
    LabelMismatch,
    ObservationScheme,
    _BIndex,
    _BKeys,
    check_bisim,
    check_lemma2_relation,
    in_relation_B,
)
from mapsep.fuzz import random_program
from mapsep.ivl import IVLError, normalize, parse
from mapsep.ivl.ast import BLOCK_SEP, Statement, check_well_formed
from mapsep.semantics import FiniteConfig, MarkerSpace, Space, StateSpaceBudgetExceeded, build_lts

from oracles import explicit, naive_bisimilar

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba path disabled")


# ---------------------------------------------------------------- kernels


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 30))
    m = draw(st.integers(0, 80))
    src = np.array(draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m)), dtype=np.int64)
    dst = np.array(draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m)), dtype=np.int64)
    lab = np.array(draw(st.lists(st.integers(0, 3), min_size=m, max_size=m)), dtype=np.int64)
    block = np.array(draw(st.lists(st.integers(0, 2), min_size=n, max_size=n)), dtype=np.int64)
    _, block = np.unique(block, return_inverse=True)
    ptr, order = _kernels.csr(n, src)
    return ptr, lab[order], dst[order], block.astype(np.int64), src[order]


def naive_classes(ptr, lab, dst, block):
    """Coarsest stable partition by pairwise greatest fixpoint."""
    n = len(block)
    succ = [{(int(lab[t]), int(dst[t])) for t in range(ptr[s], ptr[s + 1])} for s in range(n)]
    rel = {(a, b) for a in range(n) for b in range(n) if block[a] == block[b]}
    changed = True
    while changed:
        changed = False
        for a, b in list(rel):
            ok = all(any(l2 == l and (x, y) in rel for l2, y in succ[b]) for l, x in succ[a])
            ok = ok and all(any(l1 == l and (x, y) in rel for l1, x in succ[a]) for l, y in succ[b])
            if not ok:
                rel.discard((a, b))
                changed = True
    return rel


@needs_numba
@given(graphs())
def test_numba_and_numpy_rounds_identical(g):
    ptr, lab, dst, block, _ = g
    a = _kernels.refine_step(ptr, lab, dst, block, use_numba=True)
    b = _kernels.refine_step(ptr, lab, dst, block, use_numba=False)
    assert np.array_equal(a, b)


@given(graphs())
def test_refinement_is_coarsest_bisimulation(g):
    ptr, lab, dst, block, _ = g
    final = _kernels.coarsest_refinement(ptr, lab, dst, block, use_numba=False)[-1]
    rel = naive_classes(ptr, lab, dst, block)
    n = len(block)
    for a in range(n):
        for b in range(n):
            assert (final[a] == final[b]) == ((a, b) in rel)


def test_refinement_rounds_only_split():
    ptr, order = _kernels.csr(4, np.array([0, 1, 2], dtype=np.int64))
    lab = np.array([0, 0, 1], dtype=np.int64)[order]
    dst = np.array([1, 3, 3], dtype=np.int64)[order]
    hist = _kernels.coarsest_refinement(ptr, lab, dst, np.zeros(4, dtype=np.int64), use_numba=False)
    counts = [len(set(h.tolist())) for h in hist]
    assert counts == sorted(counts) and counts[-1] == 4


def test_env_flag_forces_numpy():
    code = "from mapsep import _kernels; print(_kernels.HAVE_NUMBA, _kernels.NUMBA_DISABLED)"
    env = dict(os.environ, MAPSEP_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]


# ----------------------------------------------------------- program level


def perturbed(seed):
    """A program and a copy with one command taken from another random program."""
    p = normalize(random_program(seed, max_statements=5, stores=False))
    donor = normalize(random_program(seed + 7919, max_statements=5, stores=False))
    k = seed % len(p.statements)
    c = donor.statements[seed % len(donor.statements)].cmd
    q = replace(p, statements=tuple(
        Statement(s.src, c if n == k else s.cmd, s.dst, s.id) for n, s in enumerate(p.statements)
    ))
    try:
        check_well_formed(q)
    except IVLError:
        q = p
    return p, q


@given(st.integers(0, 5_000))
def test_checker_agrees_with_naive_bisimulation(seed):
    p, q = perturbed(seed)
    cfg = FiniteConfig(2)
    ms = MarkerSpace()
    l1 = build_lts(Space(p, cfg, ms))
    l2 = build_lts(Space(q, cfg, ms))
    e1, o1 = explicit(l1, p.base_vars)
    e2, o2 = explicit(l2, p.base_vars)
    expected = naive_bisimilar(e1, o1, e2, o2)
    v = check_bisim(p, q, cfg, use_numba=False)
    assert v.bisimilar == expected
    if _kernels.HAVE_NUMBA:
        assert check_bisim(p, q, cfg, use_numba=True).bisimilar == expected
    if not expected:
        stmts = {s.id for s in p.statements}
        assert all(step.statement in stmts for step in v.trace)
        assert v.reason


def test_self_bisimilar(fig1):
    v = check_bisim(fig1, fig1, FiniteConfig(2))
    assert v and v.states[0] == v.states[1]


def test_wrong_block_read_gives_trace(fig1):
    rep = run_pipeline(fig1)
    out = rep.output
    k = max(n for n, s in enumerate(out.statements)
            if getattr(s.cmd, "expr", None) is not None and getattr(s.cmd.expr, "index", None) == "q")
    s = out.statements[k]
    wrong = next(m for m in out.map_vars if m.startswith("mem__") and m not in ("mem__bot", s.cmd.expr.map))
    bad_cmd = replace(s.cmd, expr=replace(s.cmd.expr, map=wrong))
    bad = replace(out, statements=out.statements[:k] + (Statement(s.src, bad_cmd, s.dst, s.id),) + out.statements[k + 1:])
    v = check_bisim(rep.instrumented, bad, FiniteConfig(2))
    assert not v
    doc = json.loads(v.to_json())
    assert doc["verdict"] == "NOT_BISIMILAR"
    assert doc["trace"] and doc["trace"][-1]["statement"] == s.id
    assert "t" in doc["reason"]
    assert all(set(step) == {"statement", "split", "side", "values"} for step in doc["trace"])


def test_observation_subset_and_mismatch():
    text = "var x, y : int;\n"
    p1 = normalize(parse(text + "x := 0; y := x;\n"))
    p2 = normalize(parse(text + "x := 0; y := 0;\n"))
    assert check_bisim(p1, p2, FiniteConfig(2))
    p3 = normalize(parse(text + "x := 0; havoc y;\n"))
    assert not check_bisim(p1, p3, FiniteConfig(2))
    assert check_bisim(p1, p3, FiniteConfig(2), ObservationScheme(("x",)))
    with pytest.raises(LabelMismatch):
        check_bisim(p1, p1, FiniteConfig(2), ObservationScheme(("z",)))
    with pytest.raises(LabelMismatch):
        check_bisim(p1, normalize(parse(text + "x := 0;\n")), FiniteConfig(2))


def test_internal_locations_are_contracted():
    head = "var x, y : int;\ninit l0;\nlocs l0, l1, l2;\n"
    p1 = parse(head + "l0 -> l1 : x := y;\nl1 -> l2 : skip;\n")
    p2 = parse(head + "l0 -> l1 : skip;\nl1 -> l2 : x := y;\n")
    cfg = FiniteConfig(2)
    assert not check_bisim(p1, p2, cfg)
    assert check_bisim(p1, p2, cfg, ObservationScheme(internal=frozenset({"l1"})))


@given(st.integers(0, 5_000))
def test_pipeline_bisimilar_d2(seed):
    rep = run_pipeline(random_program(seed, max_statements=6))
    cfg = FiniteConfig(2)
    assert check_bisim(rep.program, rep.instrumented, cfg)
    assert check_bisim(rep.instrumented, rep.output, cfg)
    assert check_lemma2_relation(rep.instrumented, rep.output, rep.partition, cfg)


def test_relation_budget(fig1):
    rep = run_pipeline(fig1)
    with pytest.raises(StateSpaceBudgetExceeded):
        check_lemma2_relation(rep.instrumented, rep.output, rep.partition, FiniteConfig(2, max_states=5))


def test_relation_violation_reported(fig1):
    rep = run_pipeline(fig1)
    v = check_lemma2_relation(rep.instrumented, replace(rep.output, families=()), rep.partition, FiniteConfig(2))
    assert not v and "differs" in v.reason


@given(st.integers(0, 5_000))
def test_relation_index_matches_predicate(seed):
    r = run_pipeline(normalize(random_program(seed, max_statements=6)), "fuzz")
    markers = MarkerSpace()
    sp1 = Space(r.instrumented, FiniteConfig(2), markers)
    sp2 = Space(r.output, FiniteConfig(2), markers)
    fam = {a: {} for a in r.program.map_vars}
    for m in r.output.map_vars:
        origin, _, block = m.partition(BLOCK_SEP)
        fam[origin][block] = m
    keys = _BKeys(sp1, sp2, fam, r.partition)
    l1, l2 = build_lts(sp1), build_lts(sp2)
    xs, ys = l1.states[:40], l2.states[:40]
    for left, pool, cands in ((True, xs, ys), (False, ys, xs)):
        index = _BIndex(keys, cands, left)
        for x in pool:
            want = [y for y in cands if in_relation_B(sp1, sp2, fam, r.partition, *((x, y) if left else (y, x))) is None]
            assert sorted(map(id, index.related(x))) == sorted(map(id, want))
