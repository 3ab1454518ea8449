"""Command-line interface: ``mapsep <command> ...``.

Exit codes: 0 success, 1 verification or equivalence failure, 2 usage or
invalid input, 3 state-space budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .bench import benchmark_source, emit_stats, report_row, run_pipeline, sweep, verify_report
from .equiv import LabelMismatch, ObservationScheme, check_bisim
from .instrument import instrument
from .ivl import IVLError, normalize, parse, pretty
from .lastwrites import lastwrites_exact, relation_json
from .semantics import ConfigError, FiniteConfig, StateSpaceBudgetExceeded, error_reachable, lts_json, reach

log = logging.getLogger("mapsep")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

DEFAULTS = {
    "domain": 3,
    "max_states": 1_000_000,
    "map_havoc_cap": 4,
    "strict_grammar": False,
    "jobs": 1,
}


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {path}: {e}") from e
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    return cfg


def _settings(args) -> dict:
    cfg = load_config(args.config)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            cfg[key] = v
    return cfg


def _finite(cfg: dict, symmetry: bool = False) -> FiniteConfig:
    return FiniteConfig(cfg["domain"], False, cfg["max_states"], cfg["map_havoc_cap"], symmetry)


def _read(path: str, cfg: dict, ir: bool = False):
    text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    return parse(text, ir=ir, strict_grammar=cfg["strict_grammar"])


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _pipeline(args, cfg):
    p = _read(args.input, cfg)
    return run_pipeline(p, Path(args.input).stem)


# ------------------------------------------------------------------ commands


def cmd_parse(args, cfg) -> int:
    p = _read(args.input, cfg, ir=args.ir)
    if args.normalize:
        p = normalize(p)
    _write(pretty(p), args.output)
    if args.lts:
        fc = _finite(cfg)
        lts = reach(p, fc)
        Path(args.lts).write_text(lts_json(lts), encoding="utf-8")
        if args.verify and error_reachable(lts):
            print("error location reachable", file=sys.stderr)
            return EXIT_FAIL
    elif args.verify:
        lts = reach(p, _finite(cfg, symmetry=args.symmetry))
        ok = not error_reachable(lts)
        print(json.dumps({"states": len(lts), "error_reachable": not ok}), file=sys.stderr)
        return EXIT_OK if ok else EXIT_FAIL
    return EXIT_OK


def cmd_instrument(args, cfg) -> int:
    p = normalize(_read(args.input, cfg))
    _write(pretty(instrument(p)), args.output)
    return EXIT_OK


def cmd_analyze(args, cfg) -> int:
    rep = _pipeline(args, cfg)
    _write(rep.analysis.to_json(), args.output)
    if args.relation:
        Path(args.relation).write_text(relation_json(rep.analysis.lastwrites), encoding="utf-8")
    if args.exact:
        exact = lastwrites_exact(rep.program, _finite(cfg))
        Path(args.exact).write_text(relation_json(exact), encoding="utf-8")
        if not exact <= rep.analysis.lastwrites:
            print("analysis misses last-write pairs", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def cmd_partition(args, cfg) -> int:
    rep = _pipeline(args, cfg)
    _write(rep.partition.to_json(), args.output)
    return EXIT_OK


def cmd_transform(args, cfg) -> int:
    rep = _pipeline(args, cfg)
    _write(pretty(rep.output), args.output)
    if args.emit_partition:
        Path(args.emit_partition).write_text(rep.partition.to_json(), encoding="utf-8")
    if args.verify:
        rep.verification = verify_report(rep, _finite(cfg))
        print(json.dumps(rep.verification, indent=2), file=sys.stderr)
        return EXIT_OK if rep.verification["ok"] else EXIT_FAIL
    return EXIT_OK


def cmd_check(args, cfg) -> int:
    p1 = _read(args.left, cfg, ir=True)
    p2 = _read(args.right, cfg, ir=True)
    obs = ObservationScheme(tuple(args.observe.split(",")) if args.observe else None)
    verdict = check_bisim(p1, p2, _finite(cfg), obs)
    doc = json.loads(verdict.to_json())
    doc["domain"] = cfg["domain"]
    _write(json.dumps(doc, indent=2, ensure_ascii=False), args.output)
    return EXIT_OK if verdict.bisimilar else EXIT_FAIL


def cmd_gen_bench(args, cfg) -> int:
    try:
        text = benchmark_source(args.k)
    except ValueError as e:
        raise UsageError(str(e)) from e
    _write(text, args.output)
    return EXIT_OK


def _ks(spec: str) -> list[int]:
    try:
        if ":" in spec:
            lo, hi, step = (int(x) for x in spec.split(":"))
            return list(range(lo, hi + 1, step))
        return [int(x) for x in spec.split(",")]
    except ValueError as e:
        raise UsageError(f"bad k list {spec!r}") from e


def cmd_sweep(args, cfg) -> int:
    ks = _ks(args.ks)
    if any(k < 2 or k % 2 for k in ks):
        raise UsageError("benchmark sizes must be even and >= 2")
    rows = sweep(ks, jobs=args.jobs or cfg["jobs"])
    csv_text, plot = emit_stats(rows)
    _write(csv_text, args.csv)
    if args.plot:
        Path(args.plot).write_text(plot, encoding="utf-8")
    bad = [r["k"] for r in rows if r["blocks_mem"] != r["k"]]
    if bad:
        print(f"mem block count differs from k for k in {bad}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_stats(args, cfg) -> int:
    rows = []
    for path in args.inputs:
        p = _read(path, cfg)
        rep = run_pipeline(p, Path(path).stem)
        rows.append(report_row(rep))
        if args.json:
            print(json.dumps({"name": rep.name, "blocks_per_map": rep.blocks_per_map}))
    if not args.json:
        csv_text, plot = emit_stats(rows)
        _write(csv_text, args.csv)
        if args.plot:
            Path(args.plot).write_text(plot, encoding="utf-8")
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapsep", description="Split map variables by independent use.")
    ap.add_argument("--version", action="version", version=f"mapsep {__version__}")
    ap.add_argument("--config", help="JSON file with defaults (domain, max_states, map_havoc_cap, strict_grammar, jobs)")
    ap.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", type=int, help="size of the finite base domain")
    common.add_argument("--max-states", dest="max_states", type=int, help="state budget")
    common.add_argument("--map-havoc-cap", dest="map_havoc_cap", type=int)
    common.add_argument("--strict-grammar", dest="strict_grammar", action="store_true",
                        help="reject the succ/pred extension")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("parse", parents=[common], help="parse and pretty-print a program")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--ir", action="store_true", help="accept IR-only constructs")
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--lts", help="write the explored transition system as JSON")
    s.add_argument("--verify", action="store_true", help="exit 1 if an error location is reachable")
    s.add_argument("--symmetry", action="store_true", help="use symmetry reduction for --verify")
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("instrument", parents=[common], help="emit the ghost-instrumented program")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_instrument)

    s = sub.add_parser("analyze", parents=[common], help="emit the analysis result as JSON")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--relation", help="write the over-approximate relation as JSON")
    s.add_argument("--exact", help="write the exact relation at --domain as JSON and check inclusion")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("partition", parents=[common], help="emit the write partition as JSON")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_partition)

    s = sub.add_parser("transform", parents=[common], help="emit the block-separated program")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--emit-partition", dest="emit_partition")
    s.add_argument("--verify", action="store_true", help="run the bounded cross-checks at --domain")
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("check", parents=[common], help="bisimulation check of two programs")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("-o", "--output")
    s.add_argument("--observe", help="comma-separated observed base variables")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("gen-bench", parents=[common], help="emit the benchmark program with k index variables")
    s.add_argument("k", type=int)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen_bench)

    s = sub.add_parser("sweep", parents=[common], help="run the pipeline over benchmark sizes")
    s.add_argument("--ks", default="2:20:2", help="list 2,4,6 or range lo:hi:step")
    s.add_argument("--jobs", type=int)
    s.add_argument("--csv", help="CSV output (default stdout)")
    s.add_argument("--plot", help="plot-data JSON output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("stats", parents=[common], help="block counts and timings for programs")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--csv")
    s.add_argument("--plot")
    s.add_argument("--json", action="store_true", help="one JSON line per program")
    s.set_defaults(func=cmd_stats)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _settings(args)
        return args.func(args, cfg)
    except UsageError as e:
        print(f"mapsep: {e}", file=sys.stderr)
        return EXIT_USAGE
    except IVLError as e:
        print(f"mapsep: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, LabelMismatch, OSError) as e:
        print(f"mapsep: {e}", file=sys.stderr)
        return EXIT_USAGE
    except StateSpaceBudgetExceeded as e:
        print(f"mapsep: state budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
