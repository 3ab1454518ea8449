"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import itertools
import time

import pytest

from mapsep.analysis import analyze
from mapsep.bench import fit_exponent, gen_benchmark, run_pipeline
from mapsep.equiv import check_bisim, check_lemma2_relation
from mapsep.fuzz import random_program
from mapsep.instrument import instrument
from mapsep.ivl import IVLError, normalize, parse, pretty
from mapsep.ivl.ast import is_write
from mapsep.lastwrites import lastwrites_exact, lastwrites_from_ghosts
from mapsep.mutants import MUTANTS, detect
from mapsep.semantics import FiniteConfig, error_reachable, reach

from conftest import CORPUS, corpus_files, load, record

N_FUZZ = 200
BUDGET = 1_000_000


@pytest.fixture(scope="module")
def programs():
    named = [(f.stem, load(f)) for f in corpus_files("paper", "unit", "fuzz-seeds")]
    named += [(f"fuzz{seed}", normalize(random_program(seed, max_statements=8))) for seed in range(N_FUZZ)]
    return named


@pytest.fixture(scope="module")
def crosschecks(programs):
    """Run every bounded check once; failures are collected per criterion."""
    fails = {"bisim_p_pre": [], "bisim_pre_new": [], "relation": [], "sound": [], "prop1": []}
    for name, p in programs:
        rep = run_pipeline(p, name)
        sizes = [2, 3] + ([4] if len(p.statements) <= 6 else [])
        for n in sizes:
            cfg = FiniteConfig(n, max_states=BUDGET)
            # the |D|=4 soundness run only needs last-write pairs, so orbits and lazy havoc are safe there
            lw_cfg = FiniteConfig(n, max_states=BUDGET, symmetry=True, lazy_havoc=True) if n == 4 else cfg
            exact = lastwrites_exact(rep.program, lw_cfg)
            if not exact <= rep.analysis.lastwrites:
                fails["sound"].append((name, n, sorted(exact - rep.analysis.lastwrites)[:3]))
            if n == 4:
                continue
            if lastwrites_from_ghosts(rep.instrumented, cfg) != exact:
                fails["prop1"].append((name, n))
            if not check_bisim(rep.program, rep.instrumented, cfg):
                fails["bisim_p_pre"].append((name, n))
            v = check_bisim(rep.instrumented, rep.output, cfg)
            if not v:
                fails["bisim_pre_new"].append((name, n, v.reason))
            b = check_lemma2_relation(rep.instrumented, rep.output, rep.partition, cfg)
            if not b:
                fails["relation"].append((name, n, b.reason))
    return fails


def test_ac1_fig1_reproduction(fig1):
    t = time.perf_counter()
    rep = run_pipeline(fig1, "fig1")
    elapsed = time.perf_counter() - t
    golden = (CORPUS / "paper" / "fig1.expected.mivl").read_text()
    mem_copies = [m for m in rep.output.map_vars if m.startswith("mem__") and m != "mem__bot"]
    wiring = {}
    for s in rep.output.statements:
        c = s.cmd
        if is_write(c) and c.target.startswith("mem__"):
            wiring.setdefault(c.expr.updates[0][0], set()).add(c.target)
        elif hasattr(c, "expr") and getattr(c.expr, "map", "").startswith("mem__"):
            wiring.setdefault(c.expr.index, set()).add(c.expr.map)
    ok = (
        rep.blocks_per_map["mem"] == 2
        and len(mem_copies) == 2
        and pretty(rep.output) == golden
        and all(len(v) == 1 for v in wiring.values())
        and wiring["p"] != wiring["q"]
        and elapsed < 5.0
    )
    record("AC1 Fig. 1 reproduction", ok, f"mem blocks={rep.blocks_per_map['mem']}, {elapsed:.3f}s")
    assert ok


def test_ac2_benchmark_scaling():
    ks = list(range(2, 21, 2))
    times, blocks = [], []
    for k in ks:
        t = time.perf_counter()
        rep = run_pipeline(gen_benchmark(k), f"bench-{k}")
        times.append(time.perf_counter() - t)
        blocks.append(rep.blocks_per_map["mem"])
    slope = fit_exponent(ks, times)
    ok = blocks == ks and max(times) < 60.0 and slope < 3.0
    record("AC2 benchmark scaling", ok, f"blocks={blocks}, max {max(times):.2f}s, exponent {slope:.2f}")
    assert ok


def test_ac3_bisimulation_and_mutants(programs, crosschecks):
    survived = [m.name for m in MUTANTS if not detect(m)]
    bad = crosschecks["bisim_p_pre"] + crosschecks["bisim_pre_new"] + crosschecks["relation"]
    fuzzed = sum(1 for name, _ in programs if name.startswith("fuzz"))
    ok = not bad and not survived and fuzzed >= 200 and len(MUTANTS) == 20
    record("AC3 bisimulation P~P_pre~P' and relation B", ok,
           f"{len(programs)} programs, {len(bad)} failures, {len(MUTANTS) - len(survived)}/{len(MUTANTS)} mutants caught")
    assert ok, (bad[:5], survived)


def test_ac4_lastwrites_soundness(programs, crosschecks):
    bad = crosschecks["sound"]
    small = sum(1 for _, p in programs if len(p.statements) <= 6)
    record("AC4 over-approximation soundness", not bad, f"{len(bad)} violations, {small} programs also at |D|=4")
    assert not bad, bad[:5]


def test_ac5_two_lastwrites_agree(programs, crosschecks):
    bad = crosschecks["prop1"]
    record("AC5 tagged run equals ghost readout", not bad, f"{len(bad)} disagreements over {len(programs)} programs")
    assert not bad, bad[:5]


def test_ac6_precision(fig3):
    misses = []
    for k in range(2, 21, 2):
        p = normalize(gen_benchmark(k))
        res = analyze(instrument(p))
        loc = next(s.src for s in p.statements if is_write(s.cmd) and s.cmd.target == "mem")
        ps = [f"p{n}" for n in range(1, k + 1)]
        misses += [(k, x, y) for x, y in itertools.combinations(ps, 2) if not res.disequal(loc, x, y)]
    rep = run_pipeline(fig3, "fig3")
    loc = next(s.src for s in fig3.statements if is_write(s.cmd) and s.cmd.target == "mem")
    fig3_ok = rep.blocks_per_map["mem"] == 2 and rep.analysis.disequal(loc, "p", "q")
    ok = not misses and fig3_ok
    record("AC6 precision floor", ok, f"{len(misses)} missed disequalities, Fig. 3 mem blocks={rep.blocks_per_map['mem']}")
    assert ok


def test_ac7_bounded_verification():
    rows = []
    ok = True
    for k in (2, 4, 6):
        n = k + 2
        rep = run_pipeline(gen_benchmark(k), f"bench-{k}")
        cfg = FiniteConfig(n, max_states=BUDGET, symmetry=True)
        l_p = reach(rep.program, cfg)
        l_new = reach(rep.output, cfg)
        good = not error_reachable(l_p) and not error_reachable(l_new) and len(l_new) <= len(l_p)
        ok &= good
        rows.append(f"k={k} |D|={n}: {len(l_p)}/{len(l_new)} states")
    record("AC7 bounded verification of P and P'", ok, "; ".join(rows))
    assert ok


def test_ac8_parser_contract():
    text = (CORPUS / "paper" / "assume_maps.mivl").read_text()
    try:
        parse(text)
        code = None
    except IVLError as e:
        code = e.code
    ok = code == "map-equality-assume"
    record("AC8 map equality in assume rejected", ok, f"code={code}")
    assert ok
