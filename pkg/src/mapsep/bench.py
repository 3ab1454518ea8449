"""Scalable benchmark family, end-to-end pipeline driver and measurement output.

The benchmark with ``k`` index variables allocates ``k`` cells with an inlined
``malloc`` (havoc a pointer, require its ``valid`` bit to be clear, set it),
initializes them, then loops nondeterministically over ``k`` bodies that
increment (odd positions) or decrement (even positions) one cell each, and
finally asserts the sign of every cell.  Boolean and numeric constants are
variables assigned literals at entry: ``fls``/``neg`` hold 0, ``tru``/``zero``
hold 1; ``t >= zero`` is encoded as ``!(t == neg)`` and ``t <= zero`` as
``t == neg || t == zero``, which is exact for saturating arithmetic.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import AnalysisResult, analyze
from .equiv import check_bisim, check_lemma2_relation
from .instrument import instrument
from .ivl import normalize, parse
from .ivl.ast import Program, write_statements
from .lastwrites import lastwrites_exact
from .partition import Partition, build_R, check_refines, partition
from .semantics import FiniteConfig
from .transform import transform


def benchmark_source(k: int) -> str:
    if k < 2 or k % 2:
        raise ValueError(f"benchmark size must be an even number >= 2, got {k}")
    ps = [f"p{n}" for n in range(1, k + 1)]
    ts = [f"t{n}" for n in range(1, k + 1)]
    lines = [
        f"// allocation benchmark, k = {k}",
        "var mem, valid : [int]int;",
        f"var {', '.join(ps)} : int;",
        f"var {', '.join(ts)}, t : int;",
        "var fls, tru, zero, neg : int;",
        "",
        "fls := 0; tru := 1; zero := 1; neg := 0;",
    ]
    for p, tv in zip(ps, ts):
        lines.append(f"havoc {p}; {tv} := valid[{p}]; assume {tv} == fls; valid[{p}] := tru;")
    for p in ps:
        lines.append(f"mem[{p}] := zero;")
    lines.append("while (*) {")
    for n, p in enumerate(ps):
        op = "succ" if n % 2 == 0 else "pred"
        body = f"t := mem[{p}]; t := {op}(t); mem[{p}] := t;"
        if n == 0:
            lines.append(f"  if (*) {{ {body} }}")
        elif n < k - 1:
            lines.append(f"  else if (*) {{ {body} }}")
        else:
            lines.append(f"  else {{ {body} }}")
    lines.append("}")
    for n, p in enumerate(ps):
        cond = "!(t == neg)" if n % 2 == 0 else "t == neg || t == zero"
        lines.append(f"t := mem[{p}]; assert {cond};")
    return "\n".join(lines) + "\n"


def gen_benchmark(k: int) -> Program:
    return parse(benchmark_source(k))


@dataclass
class PipelineReport:
    name: str
    times: dict[str, float]
    program: Program
    instrumented: Program
    analysis: AnalysisResult
    partition: Partition
    output: Program
    blocks_per_map: dict[str, int]
    verification: dict = field(default_factory=dict)

    @property
    def total_time(self) -> float:
        return sum(self.times.values())

    def summary(self) -> dict:
        return {
            "name": self.name,
            "times": self.times,
            "total_time": self.total_time,
            "blocks_per_map": self.blocks_per_map,
            "statements_in": len(self.program.statements),
            "statements_out": len(self.output.statements),
            "preimage": {r: sorted(v) for r, v in sorted(self.analysis.preimage.items())},
            "verification": self.verification,
        }


def blocks_per_map(p: Program, part: Partition) -> dict[str, int]:
    """Number of write blocks touching each map (the ``bot`` copy is not counted)."""
    out = {a: set() for a in p.map_vars}
    for s in write_statements(p):
        out[s.cmd.target].add(part.name(part.block_of(s.id)))
    return {a: len(v) for a, v in out.items()}


def run_pipeline(p: Program, name: str = "program", verify: FiniteConfig | None = None) -> PipelineReport:
    """normalize, instrument, analyze, partition, transform (optionally verify)."""
    times = {}
    t = time.perf_counter()
    p = normalize(p)
    times["normalize"] = time.perf_counter() - t
    t = time.perf_counter()
    pre = instrument(p)
    times["instrument"] = time.perf_counter() - t
    t = time.perf_counter()
    res = analyze(pre)
    times["analyze"] = time.perf_counter() - t
    t = time.perf_counter()
    part = partition(p, build_R(res.preimage))
    bad = check_refines(part, res.preimage)
    assert not bad, f"partition does not refine preimages of {bad}"
    times["partition"] = time.perf_counter() - t
    t = time.perf_counter()
    out = transform(p, part, res.preimage)
    times["transform"] = time.perf_counter() - t
    rep = PipelineReport(name, times, p, pre, res, part, out, blocks_per_map(p, part))
    if verify is not None:
        rep.verification = verify_report(rep, verify)
    return rep


def verify_report(rep: PipelineReport, cfg: FiniteConfig) -> dict:
    exact = lastwrites_exact(rep.program, cfg)
    missing = sorted(exact - rep.analysis.lastwrites)
    v1 = check_bisim(rep.program, rep.instrumented, cfg)
    v2 = check_bisim(rep.instrumented, rep.output, cfg)
    b = check_lemma2_relation(rep.instrumented, rep.output, rep.partition, cfg)
    return {
        "domain": cfg.domain,
        "lastwrites_sound": not missing,
        "lastwrites_missing": [list(x) for x in missing],
        "bisim_p_ppre": v1.bisimilar,
        "bisim_ppre_pprime": v2.bisimilar,
        "relation_B": b.holds,
        "ok": not missing and v1.bisimilar and v2.bisimilar and b.holds,
    }


# ------------------------------------------------------------- measurements

CSV_FIELDS = ["name", "k", "normalize", "instrument", "analyze", "partition", "transform", "total",
              "blocks_mem", "blocks_valid", "statements_in", "statements_out"]


def report_row(rep: PipelineReport, k: int | None = None) -> dict:
    row = {"name": rep.name, "k": k if k is not None else ""}
    row.update({s: f"{rep.times[s]:.6f}" for s in ("normalize", "instrument", "analyze", "partition", "transform")})
    row["total"] = f"{rep.total_time:.6f}"
    row["blocks_mem"] = rep.blocks_per_map.get("mem", "")
    row["blocks_valid"] = rep.blocks_per_map.get("valid", "")
    row["statements_in"] = len(rep.program.statements)
    row["statements_out"] = len(rep.output.statements)
    return row


def emit_stats(rows: list[dict]) -> tuple[str, str]:
    """CSV text and a plot-data JSON document (series keyed by column)."""
    if not rows:
        raise ValueError("no reports")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({f: r.get(f, "") for f in CSV_FIELDS})
    plot = {
        "x_label": "# index variables in program",
        "y_label": "runtime (s)",
        "x": [r["k"] for r in rows],
        "series": {s: [float(r[s]) for r in rows] for s in ("analyze", "total")},
        "blocks_mem": [r["blocks_mem"] for r in rows],
    }
    return buf.getvalue(), json.dumps(plot, indent=2)


def fit_exponent(ks, ts) -> float:
    """Least-squares slope of log(time) against log(k)."""
    import numpy as np

    x = np.log(np.asarray(ks, dtype=float))
    y = np.log(np.maximum(np.asarray(ts, dtype=float), 1e-9))
    return float(np.polyfit(x, y, 1)[0])


def _sweep_one(k: int) -> dict:
    rep = run_pipeline(gen_benchmark(k), f"bench-{k}")
    return report_row(rep, k)


def sweep(ks, jobs: int = 1) -> list[dict]:
    ks = list(ks)
    if jobs <= 1:
        return [_sweep_one(k) for k in ks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_sweep_one, ks))


__all__ = [
    "PipelineReport",
    "benchmark_source",
    "emit_stats",
    "fit_exponent",
    "gen_benchmark",
    "run_pipeline",
    "sweep",
]
