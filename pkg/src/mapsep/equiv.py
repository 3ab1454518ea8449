"""Bisimulation checking of two programs on a finite base domain.

Both programs are explored symbolically (see :mod:`mapsep.semantics`) with a
shared marker space, so equal initial values carry equal markers in both.
Transitions are labeled ``(statement id, split)``; states are observed through
their location and a chosen list of base variables.  Strong bisimilarity of
the two labeled systems is decided by signature refinement on their disjoint
union.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .instrument import ghost
from .ivl.ast import BLOCK_SEP, BOT, Program
from .partition import Partition
from .semantics import LTS, FiniteConfig, MarkerSpace, Space, State, StateSpaceBudgetExceeded, build_lts, is_marker


class LabelMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ObservationScheme:
    """Which base variables are observed (``None``: all of the first program's)."""

    variables: tuple[str, ...] | None = None
    internal: frozenset = frozenset()  # locations contracted away in both programs


@dataclass
class TraceStep:
    statement: str
    split: dict
    side: str  # "both", "left" or "right": who can take the step
    values: dict = field(default_factory=dict)  # observed variables after the step

    def as_dict(self):
        return {"statement": self.statement, "split": self.split, "side": self.side, "values": self.values}


@dataclass
class BisimVerdict:
    bisimilar: bool
    trace: list[TraceStep] = field(default_factory=list)
    reason: str = ""
    states: tuple[int, int] = (0, 0)
    rounds: int = 0

    def __bool__(self):
        return self.bisimilar

    def to_json(self) -> str:
        return json.dumps(
            {
                "verdict": "BISIMILAR" if self.bisimilar else "NOT_BISIMILAR",
                "reason": self.reason,
                "states": list(self.states),
                "rounds": self.rounds,
                "trace": [s.as_dict() for s in self.trace],
            },
            indent=2,
            ensure_ascii=False,
        )


# ----------------------------------------------------------- LTS plumbing


def _contract(lts: LTS, internal: frozenset):
    """Transitions between visible states, chaining through internal locations.

    A chain keeps the id of its first statement and the union of its splits.
    """
    states = lts.states
    out_by = {}
    for t in range(len(lts.src)):
        out_by.setdefault(lts.src[t], []).append(t)
    visible = [k for k, s in enumerate(states) if s.pc not in internal]
    trans = []
    for k in visible:
        work = [(t, lts.label[t][0], lts.label[t][1]) for t in out_by.get(k, ())]
        while work:
            t, sid, split = work.pop()
            d = lts.dst[t]
            if states[d].pc in internal:
                for t2 in out_by.get(d, ()):
                    work.append((t2, sid, tuple(sorted(set(split) | set(lts.label[t2][1])))))
            else:
                trans.append((k, (sid, split), d))
    return visible, trans


@dataclass
class _Union:
    states: list[State]
    side: np.ndarray
    block0: np.ndarray
    ptr: np.ndarray
    lab: np.ndarray
    dst: np.ndarray
    labels: list
    init: tuple[int, int]
    offset: int
    obs: list[str] = field(default_factory=list)
    spaces: tuple = ()

    def values(self, a: int, markers: MarkerSpace) -> dict:
        sp = self.spaces[self.side[a]]
        return {v: _show(markers, self.states[a].base[sp.bidx[v]]) for v in self.obs}

    def differ(self, a: int, b: int, markers: MarkerSpace) -> list[str]:
        out = []
        for v in self.obs:
            va = self.states[a].base[self.spaces[self.side[a]].bidx[v]]
            vb = self.states[b].base[self.spaces[self.side[b]].bidx[v]]
            if va != vb:
                out.append(f"{v} ({_show(markers, va)} vs {_show(markers, vb)})")
        return out


def _union(l1: LTS, l2: LTS, obs: list[str], internal: frozenset) -> _Union:
    parts = []
    for lts in (l1, l2):
        if internal:
            vis, trans = _contract(lts, internal)
        else:
            vis = list(range(len(lts.states)))
            trans = list(zip(lts.src, lts.label, lts.dst))
        parts.append((lts, vis, trans))
    stmt1 = {s.id for s in l1.space.p.statements if s.src not in internal}
    stmt2 = {s.id for s in l2.space.p.statements if s.src not in internal}
    if stmt1 != stmt2:
        raise LabelMismatch(f"statement ids differ: {sorted(stmt1 ^ stmt2)[:5]}")
    states: list[State] = []
    side = []
    renum = []
    for n, (lts, vis, _) in enumerate(parts):
        m = {}
        for k in vis:
            m[k] = len(states)
            states.append(lts.states[k])
            side.append(n)
        renum.append(m)
    label_ids: dict = {}
    labels = []
    src, lab, dst = [], [], []
    for n, (lts, _, trans) in enumerate(parts):
        m = renum[n]
        for a, label, b in trans:
            li = label_ids.get(label)
            if li is None:
                li = label_ids[label] = len(labels)
                labels.append(label)
            src.append(m[a])
            lab.append(li)
            dst.append(m[b])
    keys: dict = {}
    block0 = []
    for n, s in enumerate(states):
        sp = parts[side[n]][0].space
        key = (s.pc, tuple(s.base[sp.bidx[v]] for v in obs))
        block0.append(keys.setdefault(key, len(keys)))
    src_a = np.asarray(src, dtype=np.int64)
    ptr, order = _kernels.csr(len(states), src_a)
    lab_a = np.asarray(lab, dtype=np.int64)[order]
    dst_a = np.asarray(dst, dtype=np.int64)[order]
    init = (renum[0][l1.initial[0]], renum[1][l2.initial[0]])
    return _Union(states, np.asarray(side), np.asarray(block0, dtype=np.int64), ptr, lab_a, dst_a, labels,
                  init, len(parts[0][1]), list(obs), (l1.space, l2.space))


def _show(markers: MarkerSpace, v) -> str:
    return markers.describe(v) if is_marker(v) else str(v)


def _agree(history, a, b) -> int:
    return next((k for k, blk in enumerate(history) if blk[a] != blk[b]), len(history))


def _describe_split(markers: MarkerSpace, split) -> dict:
    return {markers.describe(m): d for m, d in split}


def _distinguish(u: _Union, history: list[np.ndarray], a: int, b: int, markers: MarkerSpace) -> tuple[list[TraceStep], str]:
    """Labels leading from ``a``/``b`` to an observable difference."""
    trace: list[TraceStep] = []
    names = ("left", "right")
    while True:
        r = next(k for k, blk in enumerate(history) if blk[a] != blk[b])
        if r == 0:
            sa, sb = u.states[a], u.states[b]
            if sa.pc != sb.pc:
                return trace, f"locations differ: {sa.pc} vs {sb.pc}"
            return trace, f"observed variables differ at {sa.pc}: " + ", ".join(u.differ(a, b, markers))
        prev = history[r - 1]

        def sig(s):
            return {(u.lab[t], prev[u.dst[t]]) for t in range(u.ptr[s], u.ptr[s + 1])}

        sa, sb = sig(a), sig(b)
        if not sa - sb:
            a, b = b, a
            sa, sb = sb, sa
        l, blk = min(sa - sb)
        label = u.labels[l]
        a2 = next(int(u.dst[t]) for t in range(u.ptr[a], u.ptr[a + 1]) if u.lab[t] == l and prev[u.dst[t]] == blk)
        bs = [int(u.dst[t]) for t in range(u.ptr[b], u.ptr[b + 1]) if u.lab[t] == l]
        split = _describe_split(markers, label[1])
        if not bs:
            trace.append(TraceStep(label[0], split, names[u.side[a]]))
            return trace, f"only the {names[u.side[a]]} program can take {label[0]}"
        trace.append(TraceStep(label[0], split, "both", u.values(a2, markers)))
        # follow the answer that stays equivalent longest
        a, b = a2, max(bs, key=lambda c: (_agree(history, a2, c), -c))


def check_bisim(
    p1: Program,
    p2: Program,
    cfg: FiniteConfig = FiniteConfig(),
    obs: ObservationScheme = ObservationScheme(),
    use_numba: bool | None = None,
) -> BisimVerdict:
    """Decide strong bisimilarity of ``p1`` and ``p2`` at ``cfg``."""
    variables = list(obs.variables if obs.variables is not None else p1.base_vars)
    for v in variables:
        if v not in p1.base_vars or v not in p2.base_vars:
            raise LabelMismatch(f"observed variable {v!r} missing from one program")
    markers = MarkerSpace()
    l1 = build_lts(Space(p1, cfg, markers))
    l2 = build_lts(Space(p2, cfg, markers))
    u = _union(l1, l2, variables, obs.internal)
    history = _kernels.coarsest_refinement(u.ptr, u.lab, u.dst, u.block0, use_numba)
    final = history[-1]
    a, b = u.init
    sizes = (len(l1.states), len(l2.states))
    if final[a] == final[b]:
        return BisimVerdict(True, states=sizes, rounds=len(history))
    trace, reason = _distinguish(u, history, a, b, markers)
    return BisimVerdict(False, trace, reason, sizes, len(history))


# ------------------------------------------------------- explicit relation


def in_relation_B(sp_pre: Space, sp_new: Space, fam: dict, part: Partition, s: State, t: State) -> str | None:
    """Why ``(s, t)`` violates the relation of the block-separation proof, or ``None``."""
    if s.pc != t.pc:
        return "locations differ"
    if s.base != tuple(t.base[sp_new.bidx[v]] for v in sp_pre.p.base_vars):
        return "base variables differ"
    for a in sp_pre.p.map_vars:
        cells = s.maps[sp_pre.midx[a]]
        lw = s.maps[sp_pre.midx[ghost(a)]]
        members = fam[a]
        if not members:
            return f"{a} has no copies"
        for j in range(sp_pre.n):
            if lw[j] == BOT:
                for m in members.values():
                    if t.maps[sp_new.midx[m]][j] != cells[j]:
                        return f"{a}-lw[{j}] is ⊥ but a copy of {a} differs there"
            else:
                try:
                    m = members[part.name(part.block_of(lw[j]))]
                except KeyError:
                    return f"no copy of {a} for the block of {lw[j]}"
                if t.maps[sp_new.midx[m]][j] != cells[j]:
                    return f"{m}[{j}] differs from {a}[{j}] written by {lw[j]}"
    return None


class _BKeys:
    """Keys that make membership in the relation an equality test.

    A state of the instrumented program fixes its ghost maps ``g`` and the
    values every related state must show; :meth:`new` reads those values off a
    state of the transformed program for a given ``g``.
    """

    def __init__(self, sp_pre: Space, sp_new: Space, fam: dict, part: Partition):
        self.sp_pre, self.sp_new = sp_pre, sp_new
        self.maps = sp_pre.p.map_vars
        self.midx = [(sp_pre.midx[a], sp_pre.midx[ghost(a)]) for a in self.maps]
        self.bproj = [sp_new.bidx[v] for v in sp_pre.p.base_vars]
        self.copies = []  # per map: (all copy indices, {write id: copy index})
        for a in self.maps:
            members = fam[a]
            where = {}
            for blk in part.blocks:
                name = part.name(blk)
                if name in members:
                    where.update((w, sp_new.midx[members[name]]) for w in blk)
            self.copies.append(([sp_new.midx[m] for m in members.values()], where))
        self._missing = object()

    def pre(self, s: State):
        g = tuple(s.maps[gi] for _, gi in self.midx)
        return g, (s.pc, s.base, tuple(s.maps[mi] for mi, _ in self.midx))

    def new(self, t: State, g):
        base = tuple(t.base[k] for k in self.bproj)
        cells = []
        for (every, where), lw in zip(self.copies, g):
            if not every:
                return None
            row = []
            for j, w in enumerate(lw):
                if w == BOT:
                    vs = {t.maps[m][j] for m in every}
                    row.append(vs.pop() if len(vs) == 1 else self._missing)
                elif w in where:
                    row.append(t.maps[where[w]][j])
                else:
                    return None
            cells.append(tuple(row))
        return t.pc, base, tuple(cells)


class _BIndex:
    """Candidates of one step, looked up by relation key."""

    def __init__(self, keys: _BKeys, ys, left: bool):
        self.keys, self.ys, self.left = keys, ys, left
        self.by_g = {}
        if not left:
            for y in ys:
                g, k = keys.pre(y)
                self.by_g.setdefault(g, {}).setdefault(k, []).append(y)

    def related(self, x) -> list:
        if self.left:
            g, k = self.keys.pre(x)
            table = self.by_g.get(g)
            if table is None:
                table = self.by_g[g] = {}
                for y in self.ys:
                    table.setdefault(self.keys.new(y, g), []).append(y)
            return table.get(k, [])
        out = []
        for g, table in self.by_g.items():
            out += table.get(self.keys.new(x, g), [])
        return out


@dataclass
class RelationVerdict:
    holds: bool
    pairs: int
    reason: str = ""
    trace: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.holds


def check_lemma2_relation(p_pre: Program, p_new: Program, part: Partition, cfg: FiniteConfig = FiniteConfig()) -> RelationVerdict:
    """Check that the explicit relation is a bisimulation relating the initial states."""
    markers = MarkerSpace()
    sp1 = Space(p_pre, cfg, markers)
    sp2 = Space(p_new, cfg, markers)
    # copies are recognized by name, so a lost family declaration cannot hide them
    fam = {a: {} for a in p_pre.map_vars}
    for m in p_new.map_vars:
        origin, sep, block = m.partition(BLOCK_SEP)
        if sep and origin in fam:
            fam[origin][block] = m
    out1 = {}
    for st in p_pre.statements:
        out1.setdefault(st.src, []).append(st)
    out2 = {}
    for st in p_new.statements:
        out2.setdefault(st.src, []).append(st)

    def succ(space, outs, s):
        res = {}
        for st in outs.get(s.pc, ()):
            for split, t in space.step(s, st):
                res.setdefault((st.id, split), []).append(t)
        return res

    keys = _BKeys(sp1, sp2, fam, part)
    s0, t0 = sp1.initial_state(), sp2.initial_state()
    why = in_relation_B(sp1, sp2, fam, part, s0, t0)
    if why:
        return RelationVerdict(False, 0, "initial states: " + why)
    seen = {(s0, t0): None}
    queue = deque([(s0, t0)])
    while queue:
        s, t = queue.popleft()
        m1, m2 = succ(sp1, out1, s), succ(sp2, out2, t)
        if set(m1) != set(m2):
            diff = sorted(set(m1) ^ set(m2), key=str)[0]
            return RelationVerdict(False, len(seen), f"step {diff[0]} possible in only one program",
                                   _pair_trace(seen, (s, t)) + [diff[0]])
        for label in sorted(m1, key=str):
            for xs, ys, left in ((m1[label], m2[label], True), (m2[label], m1[label], False)):
                index = _BIndex(keys, ys, left)
                for x in xs:
                    found = index.related(x)
                    if not found:
                        y = ys[0]
                        pair = (x, y) if left else (y, x)
                        return RelationVerdict(
                            False, len(seen),
                            f"after {label[0]}: " + (in_relation_B(sp1, sp2, fam, part, *pair) or "?"),
                            _pair_trace(seen, (s, t)) + [label[0]],
                        )
                    for y in found:
                        pair = (x, y) if left else (y, x)
                        if pair not in seen:
                            if len(seen) >= cfg.max_states:
                                raise StateSpaceBudgetExceeded(f"more than {cfg.max_states} pairs")
                            seen[pair] = ((s, t), label[0])
                            queue.append(pair)
    return RelationVerdict(True, len(seen))


def _pair_trace(seen, pair) -> list[str]:
    out = []
    while seen[pair] is not None:
        pair, sid = seen[pair]
        out.append(sid)
    return out[::-1]
