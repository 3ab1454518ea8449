"""Seeded faults in the pipeline, used to show the cross-checks have teeth.

Each mutant names a program, the stage it corrupts and the corruption.  The
mutated pipeline is run through every independent check; a mutant is caught
when at least one check fails at some tested domain size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .analysis import analyze
from .bench import gen_benchmark
from .equiv import check_bisim, check_lemma2_relation
from .instrument import ghost, instrument
from .ivl import IVLError, normalize, parse
from .ivl.ast import (
    BOT,
    AssignBase,
    AssignMap,
    ConstMap,
    HavocMap,
    HavocMapsEqual,
    MapVar,
    Program,
    Select,
    Seq,
    Skip,
    Statement,
    Store,
    WriteLit,
    flatten,
    is_write,
)
from .lastwrites import lastwrites_exact, lastwrites_from_ghosts
from .partition import Partition, build_R, check_refines, partition
from .semantics import FiniteConfig
from .transform import transform

SOURCES = {
    "bench2": None,  # the benchmark with two index variables
    "straight": """
        var a : [int]int;
        var i, j, x, y : int;
        a[i] := x;
        a[j] := y;
        x := a[i];
    """,
    "copy": """
        var a, b : [int]int;
        var i, j, x, y : int;
        a[i] := x;
        b := a;
        b[j] := y;
        x := b[i];
        y := a[j];
    """,
    "havoc": """
        var a, b : [int]int;
        var i, j, x, y : int;
        a := const(0);
        assume !(i == j);
        a[i] := x;
        a[j] := y;
        b[i] := y;
        havoc b;
        if (*) { x := a[i]; y := a[j]; } else { a := b; }
        x := a[i];
        y := a[j];
    """,
}


def load(name: str) -> Program:
    src = SOURCES[name]
    return normalize(gen_benchmark(2) if src is None else parse(src))


# ------------------------------------------------------------ edit helpers


def _find(p: Program, pred) -> Statement:
    for s in p.statements:
        if pred(s.cmd):
            return s
    raise LookupError("no statement matches the mutant's target")


def _put(p: Program, sid: str, cmd) -> Program:
    stmts = tuple(Statement(s.src, cmd if s.id == sid else s.cmd, s.dst, s.id) for s in p.statements)
    return replace(p, statements=stmts)


def _reads(map_prefix: str, index: str | None = None):
    def pred(c):
        return (isinstance(c, AssignBase) and isinstance(c.expr, Select)
                and c.expr.map.startswith(map_prefix) and (index is None or c.expr.index == index))
    return pred


def _writes(map_prefix: str, index: str | None = None):
    def pred(c):
        c0 = list(flatten(c))[0]
        return (is_write(c0) and c0.target.startswith(map_prefix)
                and (index is None or c0.expr.updates[0][0] == index))
    return pred


def _last(p: Program, pred) -> Statement:
    return [s for s in p.statements if pred(s.cmd)][-1]


# ------------------------------------------------- transform-stage faults


def read_other_block(p):
    s = _find(p, _reads("mem__", "p1"))
    other = next(m for m in p.map_vars if m.startswith("mem__") and m not in (s.cmd.expr.map, "mem__bot"))
    return _put(p, s.id, AssignBase(s.cmd.target, Select(other, "p1")))


def read_bot_copy(p):
    s = _last(p, _reads("mem__", "p1"))
    return _put(p, s.id, AssignBase(s.cmd.target, Select("mem__bot", "p1")))


def write_other_block(p):
    s = _find(p, _writes("mem__", "p1"))
    other = next(m for m in p.map_vars if m.startswith("mem__") and m not in (s.cmd.target, "mem__bot"))
    i, x = s.cmd.expr.updates[0]
    return _put(p, s.id, AssignMap(other, Store(other, ((i, x),))))


def write_dropped(p):
    return _put(p, _last(p, _writes("mem__", "p1")).id, Skip())


def write_index_swapped(p):
    s = _last(p, _writes("mem__", "p1"))
    _, x = s.cmd.expr.updates[0]
    return _put(p, s.id, AssignMap(s.cmd.target, Store(s.cmd.target, (("p2", x),))))


def write_value_swapped(p):
    s = _find(p, _writes("mem__", "p1"))
    i, _ = s.cmd.expr.updates[0]
    return _put(p, s.id, AssignMap(s.cmd.target, Store(s.cmd.target, ((i, "fls"),))))


def read_index_swapped(p):
    s = _last(p, _reads("mem__", "p2"))
    return _put(p, s.id, AssignBase(s.cmd.target, Select(s.cmd.expr.map, "p1")))


def havoc_independent(p):
    s = _find(p, lambda c: isinstance(c, HavocMapsEqual))
    return _put(p, s.id, Seq(tuple(HavocMap(m) for m in s.cmd.vars)))


def copy_drops_block(p):
    s = _find(p, lambda c: isinstance(c, Seq) and all(isinstance(x.expr, MapVar) for x in c.cmds))
    return _put(p, s.id, Seq(s.cmd.cmds[:-1]) if len(s.cmd.cmds) > 2 else s.cmd.cmds[0])


def const_partial(p):
    s = _find(p, lambda c: isinstance(c, Seq) and all(isinstance(x.expr, ConstMap) for x in c.cmds))
    return _put(p, s.id, s.cmd.cmds[0])


def families_dropped(p):
    return replace(p, families=())


# -------------------------------------------------- analysis-stage faults


def preimage_drop_write(pre: dict, p: Program) -> dict:
    out = dict(pre)
    r = _last(p, _reads("a", "i")).id
    ws = sorted(w for w in out[r] if w != BOT)
    out[r] = frozenset(out[r]) - {ws[0]}
    return out


def preimage_forget(pre: dict, p: Program) -> dict:
    out = dict(pre)
    out[_last(p, _reads("mem", "p1")).id] = frozenset({BOT})
    return out


def preimage_swap(pre: dict, p: Program) -> dict:
    out = dict(pre)
    a, b = _last(p, _reads("mem", "p1")).id, _last(p, _reads("mem", "p2")).id
    out[a], out[b] = pre[b], pre[a]
    return out


# ------------------------------------------------- partition-stage faults


def _blocks_without(part: Partition, w: str) -> list[frozenset]:
    return [b for b in part.blocks if w not in b]


def partition_split(part: Partition, p: Program) -> Partition:
    big = next(b for b in part.blocks if len(b) > 1 and BOT not in b)
    return Partition(tuple(_blocks_without(part, next(iter(big)))) + tuple(frozenset({w}) for w in big))


def partition_move(part: Partition, p: Program) -> Partition:
    w = _last(p, _writes("mem", "p1")).id
    src = part.block_of(w)
    dst = part.block_of(_last(p, _writes("mem", "p2")).id)
    rest = [b for b in part.blocks if b not in (src, dst)]
    return Partition(tuple(rest) + (src - {w}, dst | {w}))


# ----------------------------------------------- instrument-stage faults


def _ghost_part(s: Statement):
    return [c for c in flatten(s.cmd) if isinstance(c, AssignMap) and c.target.endswith(ghost(""))]


def ghost_wrong_id(pre: Program) -> Program:
    s = _last(pre, _writes("mem", "p1"))
    w, g = list(flatten(s.cmd))[0], _ghost_part(s)[0]
    other = _last(pre, _writes("mem", "p2")).id
    i = g.expr.updates[0][0]
    return _put(pre, s.id, Seq((w, AssignMap(g.target, Store(g.target, ((i, WriteLit(other)),))))))


def ghost_update_dropped(pre: Program) -> Program:
    s = _last(pre, _writes("mem", "p2"))
    return _put(pre, s.id, list(flatten(s.cmd))[0])


def ghost_copy_missing(pre: Program) -> Program:
    s = _find(pre, lambda c: any(isinstance(x, AssignMap) and isinstance(x.expr, MapVar)
                                 and not x.target.endswith(ghost("")) for x in flatten(c)))
    return _put(pre, s.id, list(flatten(s.cmd))[0])


def ghost_not_reset(pre: Program) -> Program:
    s = _find(pre, lambda c: any(isinstance(x, HavocMap) for x in flatten(c)))
    return _put(pre, s.id, list(flatten(s.cmd))[0])


@dataclass(frozen=True)
class Mutant:
    name: str
    program: str
    stage: str  # instrument | analysis | partition | transform
    apply: Callable
    domains: tuple[int, ...] = (2, 3)


MUTANTS: tuple[Mutant, ...] = (
    Mutant("read-other-block", "bench2", "transform", read_other_block),
    Mutant("read-bot-copy", "bench2", "transform", read_bot_copy),
    Mutant("write-other-block", "bench2", "transform", write_other_block),
    Mutant("write-dropped", "bench2", "transform", write_dropped),
    Mutant("write-index-swapped", "bench2", "transform", write_index_swapped),
    Mutant("write-value-swapped", "bench2", "transform", write_value_swapped),
    Mutant("read-index-swapped", "bench2", "transform", read_index_swapped),
    Mutant("havoc-independent", "havoc", "transform", havoc_independent, (2,)),  # |D|=3 exceeds the budget
    Mutant("copy-drops-block", "copy", "transform", copy_drops_block),
    Mutant("const-partial", "havoc", "transform", const_partial),
    Mutant("families-dropped", "bench2", "transform", families_dropped),
    Mutant("preimage-drop-write", "straight", "analysis", preimage_drop_write),
    Mutant("preimage-forget", "bench2", "analysis", preimage_forget),
    Mutant("preimage-swap", "bench2", "analysis", preimage_swap),
    Mutant("partition-split", "bench2", "partition", partition_split),
    Mutant("partition-move", "bench2", "partition", partition_move),
    Mutant("ghost-wrong-id", "bench2", "instrument", ghost_wrong_id),
    Mutant("ghost-update-dropped", "bench2", "instrument", ghost_update_dropped),
    Mutant("ghost-copy-missing", "copy", "instrument", ghost_copy_missing),
    Mutant("ghost-not-reset", "havoc", "instrument", ghost_not_reset),
)


def detect(m: Mutant, domains=None) -> list[str]:
    """Names of the checks that flag the mutant (empty: it survived)."""
    p = load(m.program)
    pre = instrument(p)
    if m.stage == "instrument":
        pre = m.apply(pre)
    fired = []
    for n in domains or m.domains:
        cfg = FiniteConfig(n)
        exact = lastwrites_exact(p, cfg)
        if lastwrites_from_ghosts(pre, cfg) != exact:
            fired.append(f"ghost-readout@{n}")
        if not check_bisim(p, pre, cfg):
            fired.append(f"bisim-p-pre@{n}")
        res = analyze(pre)
        preimage = res.preimage
        if m.stage == "analysis":
            preimage = m.apply(preimage, p)
        claimed = {(w, r) for r, ws in preimage.items() for w in ws if w != BOT}
        if not exact <= claimed:
            fired.append(f"soundness@{n}")
        part = partition(p, build_R(preimage))
        if m.stage == "partition":
            part = m.apply(part, p)
        if check_refines(part, preimage):
            fired.append(f"refines@{n}")
        try:
            out = transform(p, part, preimage)
        except IVLError:
            fired.append(f"transform@{n}")
            continue
        if m.stage == "transform":
            out = m.apply(out)
        if not check_bisim(pre, out, cfg):
            fired.append(f"bisim-pre-new@{n}")
        if not check_lemma2_relation(pre, out, part, cfg):
            fired.append(f"relation@{n}")
    return fired


__all__ = ["MUTANTS", "Mutant", "detect", "load"]
