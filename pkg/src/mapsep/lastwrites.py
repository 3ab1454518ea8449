"""Exact Last Writes relation on finite instantiations.

Two independent routes:

* :func:`lastwrites_exact` runs the tagged semantics and reads the tag of
  ``a[i]`` at every state where a read ``x := a[i]`` is enabled;
* :func:`lastwrites_from_ghosts` runs the *instrumented* program in plain mode
  and reads the ghost cell ``a-lw[i]`` instead.

:func:`last_write` is the recursive definition over a single concrete
execution and serves as the reference for both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .instrument import ghost, instrument
from .ivl.ast import (
    BOT,
    AssignMap,
    ConstMap,
    HavocMap,
    HavocMapsEqual,
    MapVar,
    Program,
    Statement,
    flatten,
    is_read,
    is_write,
    read_statements,
)
from .semantics import FiniteConfig, Space, State, is_marker, reach

Relation = frozenset  # of (write id, read id)


def last_write(space: Space, a: str, j: int, s0: State, steps: list[tuple[Statement, State]]) -> str:
    """Write statement responsible for ``a[j]`` at the end of the execution.

    ``steps`` is the list of ``(statement, post-state)`` pairs after ``s0``.
    Returns a statement id or :data:`BOT`.
    """
    for sigma, s in reversed(steps):
        c = sigma.cmd
        if isinstance(c, HavocMap) and c.var == a:
            return BOT
        if isinstance(c, HavocMapsEqual) and a in c.vars:
            return BOT
        if isinstance(c, AssignMap) and c.target == a:
            if isinstance(c.expr, ConstMap):
                return BOT
            if is_write(c):
                idx = c.expr.updates[0][0]
                if space.lookup(s, idx) == j:
                    return sigma.id
                continue
            if isinstance(c.expr, MapVar):
                a = c.expr.name
                continue
    return BOT


def _positions(space: Space, s: State, index_var: str) -> range | tuple:
    v = space.lookup(s, index_var)
    return range(space.n) if is_marker(v) else (v,)


def _reads(p: Program) -> list[tuple[Statement, str, str]]:
    """(statement, map, index var) for every read of a non-ghost map."""
    out = []
    for s in p.statements:
        for c in flatten(s.cmd):
            if is_read(c) and c.expr.map in p.map_vars:
                out.append((s, c.expr.map, c.expr.index))
    return out


def lastwrites_exact(p: Program, cfg: FiniteConfig = FiniteConfig()) -> Relation:
    """Pairs ``(w, r)`` such that ``w`` produced the value ``r`` reads, in some execution."""
    lts = reach(p, FiniteConfig(cfg.domain, True, cfg.max_states, cfg.map_havoc_cap, cfg.symmetry, cfg.lazy_havoc))
    space = lts.space
    by_loc: dict[str, list[State]] = {}
    for s in lts.states:
        by_loc.setdefault(s.pc, []).append(s)
    out = set()
    for r, a, i in _reads(p):
        cells_k = space.midx[a]
        for s in by_loc.get(r.src, ()):
            for d in _positions(space, s, i):
                tag = s.maps[cells_k][d][1]
                if tag != BOT:
                    out.add((tag, r.id))
    return frozenset(out)


def lastwrites_from_ghosts(p_pre: Program, cfg: FiniteConfig = FiniteConfig()) -> Relation:
    """Read the relation off the ghost maps of the instrumented program."""
    lts = reach(p_pre, FiniteConfig(cfg.domain, False, cfg.max_states, cfg.map_havoc_cap))
    space = lts.space
    by_loc: dict[str, list[State]] = {}
    for s in lts.states:
        by_loc.setdefault(s.pc, []).append(s)
    out = set()
    for r, a, i in _reads(p_pre):
        g = space.midx[ghost(a)]
        for s in by_loc.get(r.src, ()):
            for d in _positions(space, s, i):
                w = s.maps[g][d]
                if w != BOT:
                    out.add((w, r.id))
    return frozenset(out)


@dataclass
class Prop1Verdict:
    equal: bool
    exact: Relation
    ghost: Relation
    counterexample: tuple[str, str] | None = None


def crosscheck_prop1(p: Program, cfg: FiniteConfig = FiniteConfig()) -> Prop1Verdict:
    exact = lastwrites_exact(p, cfg)
    via_ghost = lastwrites_from_ghosts(instrument(p), cfg)
    diff = sorted(exact ^ via_ghost)
    return Prop1Verdict(not diff, exact, via_ghost, diff[0] if diff else None)


def relation_json(rel) -> str:
    return json.dumps([{"write": w, "read": r} for w, r in sorted(rel)], indent=2)


def read_ids(p: Program) -> list[str]:
    return [s.id for s in read_statements(p)]
