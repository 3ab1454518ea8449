"""Symmetry reduction for exhaustive reachability.

A simple sort inference splits the slots of a program (base variables, map
indices, map values) into classes that exchange values.  A class that never
meets a literal or ``succ``/``pred`` is *scalar-free*: permuting the domain
values inside it is an automorphism of the transition relation.  The
canonicalizer renames such values (named ones by first occurrence in the base
variables, the others by sorting the map columns they index) and renames
initial-value markers by first occurrence.  Canonical forms are not unique in
every case, which only costs reduction, never soundness.

The reduction preserves the set of reachable locations, and in tagged mode the
set of (write, read) pairs, since tags are statement ids and are never
permuted.  It is meant for reachability questions, not for bisimulation.
"""

from __future__ import annotations

from .ivl.ast import (
    Assume,
    AssignBase,
    AssignMap,
    ConstMap,
    Eq,
    HavocMapsEqual,
    Lit,
    MapVar,
    Not,
    Pred,
    Program,
    Select,
    Store,
    Succ,
    Var,
    flatten,
)
from .semantics import Space, State, is_marker


class _UF:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _bool_eqs(e, out):
    if isinstance(e, Eq):
        out.append((e.left, e.right))
    elif isinstance(e, Not):
        _bool_eqs(e.arg, out)
    else:
        _bool_eqs(e.left, out)
        _bool_eqs(e.right, out)


def scalar_free_classes(p: Program) -> list[tuple[set, set, set]]:
    """Classes as (base vars, maps indexed by the class, maps valued in the class)."""
    uf = _UF()
    tainted = set()
    ghosts = set(p.ghost_vars)
    for v in p.base_vars:
        uf.find(("b", v))
    for a in p.map_vars + p.ghost_vars:
        uf.find(("i", a))
        if a not in ghosts:
            uf.find(("v", a))
    for g in p.ghost_vars:
        base = g[: -len("-lw")]
        if base in p.map_vars:
            uf.union(("i", g), ("i", base))
    for _, members in p.families:
        for m in members[1:]:
            uf.union(("i", m), ("i", members[0]))
            uf.union(("v", m), ("v", members[0]))
    for s in p.statements:
        for c in flatten(s.cmd):
            if isinstance(c, AssignBase):
                x, e = ("b", c.target), c.expr
                if isinstance(e, Var):
                    uf.union(x, ("b", e.name))
                elif isinstance(e, Lit):
                    tainted.add(x)
                elif isinstance(e, Select):
                    uf.union(x, ("v", e.map))
                    uf.union(("b", e.index), ("i", e.map))
                elif isinstance(e, (Succ, Pred)):
                    uf.union(x, ("b", e.var))
                    tainted.add(x)
            elif isinstance(c, AssignMap):
                a, e = c.target, c.expr
                ghost = a in ghosts
                if isinstance(e, MapVar):
                    uf.union(("i", a), ("i", e.name))
                    if not ghost:
                        uf.union(("v", a), ("v", e.name))
                elif isinstance(e, ConstMap):
                    if not ghost:
                        tainted.add(("v", a))
                elif isinstance(e, Store):
                    uf.union(("i", a), ("i", e.map))
                    if not ghost:
                        uf.union(("v", a), ("v", e.map))
                    for i, v in e.updates:
                        uf.union(("b", i), ("i", a))
                        if isinstance(v, str):
                            uf.union(("b", v), ("v", a))
            elif isinstance(c, HavocMapsEqual):
                for m in c.vars[1:]:
                    uf.union(("i", m), ("i", c.vars[0]))
                    uf.union(("v", m), ("v", c.vars[0]))
            elif isinstance(c, Assume):
                eqs = []
                _bool_eqs(c.cond, eqs)
                for x, y in eqs:
                    uf.union(("b", x), ("b", y))
    bad = {uf.find(t) for t in tainted}
    classes: dict = {}
    for slot in list(uf.parent):
        r = uf.find(slot)
        if r in bad:
            continue
        cls = classes.setdefault(r, (set(), set(), set()))
        kind, name = slot
        {"b": cls[0], "i": cls[1], "v": cls[2]}[kind].add(name)
    # a class that indexes no map gains nothing from permuting
    return [c for _, c in sorted(classes.items(), key=lambda kv: str(kv[0])) if c[1]]


def canonicalizer(space: Space):
    """A function mapping each state to a representative of its symmetry orbit."""
    p = space.p
    n = space.n
    tagged = space.tagged
    plans = []
    for bvars, indexed, valued in scalar_free_classes(p):
        plans.append((
            [space.bidx[v] for v in p.base_vars if v in bvars],
            [space.midx[a] for a in p.map_vars + p.ghost_vars if a in indexed],
            [space.midx[a] for a in p.map_vars if a in valued],
        ))
    mk = space.markers.marker

    def canon(s: State) -> State:
        base = list(s.base)
        maps = list(s.maps)
        for bks, iks, vks in plans:
            named: dict[int, int] = {}
            for k in bks:
                v = base[k]
                if not is_marker(v) and v not in named:
                    named[v] = len(named)

            def shape(c):
                if tagged and type(c) is tuple:
                    return shape(c[0]) + (c[1],)
                if is_marker(c):
                    return (1, 0)
                if vks and c in named:
                    return (2, named[c])
                return (0, c) if type(c) is int else (3, c)

            anon = [j for j in range(n) if j not in named]
            anon.sort(key=lambda j: (tuple(shape(maps[k][j]) for k in iks), j))
            perm = [0] * n
            for v, r in named.items():
                perm[v] = r
            for r, j in enumerate(anon, start=len(named)):
                perm[j] = r
            for k in bks:
                v = base[k]
                if not is_marker(v):
                    base[k] = perm[v]
            for k in iks:
                cells = maps[k]
                new = [None] * n
                for j in range(n):
                    new[perm[j]] = cells[j]
                maps[k] = tuple(new)
            for k in vks:
                if tagged:
                    maps[k] = tuple((v if is_marker(v) else perm[v], t) for v, t in maps[k])
                else:
                    maps[k] = tuple(c if is_marker(c) else perm[c] for c in maps[k])
        # rename initial-value markers by first occurrence
        ren: dict[int, int] = {}

        def r(v):
            if is_marker(v):
                m = ren.get(v)
                if m is None:
                    m = ren[v] = mk(("c", len(ren)))
                return m
            return v

        base = tuple(r(v) for v in base)
        if tagged:
            maps = tuple(tuple((r(c[0]), c[1]) if type(c) is tuple else c for c in cells) for cells in maps)
        else:
            maps = tuple(tuple(r(c) for c in cells) for cells in maps)
        return State(s.pc, base, maps)

    return canon
