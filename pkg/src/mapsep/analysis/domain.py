"""Abstract states: congruence-closed equalities, disequalities and write-id sets.

The term universe of a program consists of

* one term per literal value (``#c``), listed first so a literal is always the
  representative of its class,
* one term per base variable,
* ``a[i]`` for every base map ``a`` and index variable ``i`` used with some map
  of ``a``'s copy class (maps connected by ``b := a``),
* ``a-lw[i]`` likewise for ghost maps; these carry write-id sets instead of
  equalities.

A non-bottom :class:`AState` is

* ``rep``: representative (least member) of each base-sort term's class,
* ``dis``: disequal pairs of representatives,
* ``lw``: the possible values of each ghost select term,
* ``rest``: per ghost map, a bound on every cell of that map.

Literal classes are pairwise disequal in every state.  Bottom is ``None``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

from ..ivl.ast import (
    BOT,
    AssignBase,
    AssignMap,
    HavocMapsEqual,
    MapVar,
    Program,
    Select,
    Store,
    flatten,
    literals,
)


class _UF:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


class Universe:
    """Finite term universe of one program (see module docs)."""

    def __init__(self, p: Program):
        self.p = p
        maps = list(p.map_vars)
        ghosts = set(p.ghost_vars)
        uf = _UF(maps + list(p.ghost_vars))
        idx_of: dict[str, set[str]] = {a: set() for a in uf.parent}
        for s in p.statements:
            for c in flatten(s.cmd):
                if isinstance(c, AssignMap):
                    e = c.expr
                    if isinstance(e, MapVar):
                        uf.union(c.target, e.name)
                    elif isinstance(e, Store):
                        uf.union(c.target, e.map)
                        idx_of[e.map].update(i for i, _ in e.updates)
                elif isinstance(c, AssignBase) and isinstance(c.expr, Select):
                    idx_of[c.expr.map].add(c.expr.index)
                elif isinstance(c, HavocMapsEqual):
                    for v in c.vars[1:]:
                        uf.union(c.vars[0], v)
        # a ghost shares the index set of its base map
        for g in p.ghost_vars:
            base = g[: -len("-lw")]
            if base in uf.parent:
                uf.union(g, base)
        cls_idx: dict[str, set[str]] = {}
        for a, ix in idx_of.items():
            cls_idx.setdefault(uf.find(a), set()).update(ix)
        order = {v: k for k, v in enumerate(p.base_vars)}

        self.lits = sorted(literals(p))
        self.names: list[str] = [f"#{c}" for c in self.lits]
        self.lit_term = {c: k for k, c in enumerate(self.lits)}
        self.var = {}
        for v in p.base_vars:
            self.var[v] = len(self.names)
            self.names.append(v)
        self.sel: dict[tuple[str, str], int] = {}
        self.gsel: dict[tuple[str, str], int] = {}
        self.gnames: list[str] = []
        self.ghosts = tuple(p.ghost_vars)
        self.ghost_k = {g: k for k, g in enumerate(self.ghosts)}
        self.gmap: list[int] = []  # ghost map (index into rest) of each ghost select
        self.sels_of_map: dict[str, list[tuple[str, int]]] = {}
        self.gsels_of_map: dict[str, list[tuple[str, int]]] = {}
        self.sels_of_index: dict[str, list[int]] = {v: [] for v in p.base_vars}
        self.gsels_of_index: dict[str, list[int]] = {v: [] for v in p.base_vars}
        for a in maps + list(p.ghost_vars):
            ix = sorted(cls_idx.get(uf.find(a), ()), key=order.__getitem__)
            if a in ghosts:
                lst = self.gsels_of_map.setdefault(a, [])
                for i in ix:
                    k = len(self.gnames)
                    self.gsel[(a, i)] = k
                    self.gnames.append(f"{a}[{i}]")
                    self.gmap.append(self.ghost_k[a])
                    lst.append((i, k))
                    self.gsels_of_index[i].append(k)
            else:
                lst = self.sels_of_map.setdefault(a, [])
                for i in ix:
                    k = len(self.names)
                    self.sel[(a, i)] = k
                    self.names.append(f"{a}[{i}]")
                    lst.append((i, k))
                    self.sels_of_index[i].append(k)
        self.size = len(self.names)
        wids = {BOT}
        for s in p.statements:
            for c in flatten(s.cmd):
                if isinstance(c, AssignMap) and isinstance(c.expr, Store):
                    for _, v in c.expr.updates:
                        if not isinstance(v, str):
                            wids.add(v.wid)
        self.top_wids = frozenset(wids)
        self.lit_dis = frozenset(_sym(combinations(range(len(self.lits)), 2)))

    def top(self) -> "AState":
        return AState(
            tuple(range(self.size)),
            self.lit_dis,
            (self.top_wids,) * len(self.gnames),
            (self.top_wids,) * len(self.ghosts),
        )


def _sym(pairs) -> set:
    return {(a, b) for a, b in pairs} | {(b, a) for a, b in pairs}


@dataclass(frozen=True)
class AState:
    rep: tuple[int, ...]
    dis: frozenset  # symmetric: (a, b) and (b, a) are both present
    lw: tuple[frozenset, ...]
    rest: tuple[frozenset, ...]

    def equal(self, a: int, b: int) -> bool:
        return self.rep[a] == self.rep[b]

    def disequal(self, a: int, b: int) -> bool:
        return (self.rep[a], self.rep[b]) in self.dis


class Work:
    """Mutable copy of an :class:`AState` used inside transfer functions."""

    def __init__(self, u: Universe, s: AState):
        self.u = u
        self.rep = list(s.rep)
        self.dis = set(s.dis)
        self.lw = list(s.lw)
        self.rest = list(s.rest)
        self.bottom = False

    # ------------------------------------------------------------ queries

    def eq(self, a: int, b: int) -> bool:
        return self.rep[a] == self.rep[b]

    def ne(self, a: int, b: int) -> bool:
        return (self.rep[a], self.rep[b]) in self.dis

    # ---------------------------------------------------------- mutation

    def havoc(self, t: int) -> None:
        """Forget every fact about term ``t``."""
        rep = self.rep
        if rep[t] == t:
            others = [x for x in range(self.u.size) if x != t and rep[x] == t]
            gone = {d for d in self.dis if d[0] == t}
            self.dis -= gone
            self.dis -= {(b, a) for a, b in gone}
            if others:
                r2 = others[0]
                for x in others:
                    rep[x] = r2
                for _, c in gone:
                    self.dis.add((r2, c))
                    self.dis.add((c, r2))
        rep[t] = t

    def havoc_var(self, v: str) -> None:
        """``v`` changes value: so do all selects indexed by ``v``."""
        self.havoc(self.u.var[v])
        for t in self.u.sels_of_index[v]:
            self.havoc(t)
        for g in self.u.gsels_of_index[v]:
            self.lw[g] = self.rest[self.u.gmap[g]]

    def merge(self, a: int, b: int) -> None:
        ra, rb = self.rep[a], self.rep[b]
        if ra == rb:
            return
        lo, hi = min(ra, rb), max(ra, rb)
        rep = self.rep
        for x in range(self.u.size):
            if rep[x] == hi:
                rep[x] = lo
        moved = {d for d in self.dis if d[0] == hi}
        if moved:
            self.dis -= moved
            self.dis -= {(b, a) for a, b in moved}
            for _, c in moved:
                if c == lo:
                    self.bottom = True
                self.dis.add((lo, c))
                self.dis.add((c, lo))

    def add_diseq(self, a: int, b: int) -> None:
        x, y = self.rep[a], self.rep[b]
        if x == y:
            self.bottom = True
        else:
            self.dis.add((x, y))
            self.dis.add((y, x))

    def _congruence(self) -> bool:
        u = self.u
        changed = False
        for sels in u.sels_of_map.values():
            first: dict[int, int] = {}
            for i, t in sels:
                ri = self.rep[u.var[i]]
                if ri in first:
                    if not self.eq(first[ri], t):
                        self.merge(first[ri], t)
                        changed = True
                else:
                    first[ri] = t
        for sels in u.gsels_of_map.values():
            groups: dict[int, list[int]] = {}
            for i, g in sels:
                groups.setdefault(self.rep[u.var[i]], []).append(g)
            for gs in groups.values():
                if len(gs) > 1:
                    meet = frozenset.intersection(*(self.lw[g] for g in gs))
                    for g in gs:
                        if self.lw[g] != meet:
                            self.lw[g] = meet
                            changed = True
            for _, g in sels:
                if not self.lw[g]:
                    self.bottom = True
        return changed

    def _contrapositive(self) -> bool:
        """Distinct contents at two indices make the indices distinct."""
        u = self.u
        changed = False
        by_rep: dict[int, list[tuple[str, str]]] = {}
        for (a, i), t in u.sel.items():
            by_rep.setdefault(self.rep[t], []).append((a, i))
        for r1, r2 in list(self.dis):
            if r1 > r2 or r1 not in by_rep or r2 not in by_rep:
                continue
            for a, i in by_rep[r1]:
                for b, j in by_rep[r2]:
                    if a == b and not self.ne(u.var[i], u.var[j]):
                        self.add_diseq(u.var[i], u.var[j])
                        changed = True
        for sels in u.gsels_of_map.values():
            by_set: dict[frozenset, list[str]] = {}
            for i, g in sels:
                by_set.setdefault(self.lw[g], []).append(i)
            for (s1, is1), (s2, is2) in combinations(by_set.items(), 2):
                if s1 & s2:
                    continue
                for i in is1:
                    for j in is2:
                        if not self.ne(u.var[i], u.var[j]):
                            self.add_diseq(u.var[i], u.var[j])
                            changed = True
        return changed

    def close(self) -> None:
        """Congruence closure and contrapositive disequalities, to a fixpoint."""
        while not self.bottom:
            c1 = self._congruence()
            if self.bottom:
                return
            c2 = self._contrapositive()
            if not (c1 or c2):
                return

    def freeze(self) -> AState | None:
        if self.bottom:
            return None
        if any(not s for s in self.lw) or any(not s for s in self.rest):
            return None
        return AState(tuple(self.rep), frozenset(self.dis), tuple(self.lw), tuple(self.rest))


def join(u: Universe, s1: AState | None, s2: AState | None) -> AState | None:
    """Least upper bound: common equalities and disequalities, united write sets."""
    if s1 is None:
        return s2
    if s2 is None:
        return s1
    if s1 == s2:
        return s1
    key_rep: dict[tuple[int, int], int] = {}
    rep = []
    subs: dict[int, list[int]] = {}  # s1 representative -> join representatives inside it
    for x in range(u.size):
        r = key_rep.get((s1.rep[x], s2.rep[x]))
        if r is None:
            r = key_rep[(s1.rep[x], s2.rep[x])] = x
            subs.setdefault(s1.rep[x], []).append(x)
        rep.append(r)
    dis = set()
    for a1, b1 in s1.dis:
        for a in subs.get(a1, ()):
            for b in subs.get(b1, ()):
                if s2.disequal(a, b):
                    dis.add((a, b))
    lw = tuple(x | y for x, y in zip(s1.lw, s2.lw))
    rest = tuple(x | y for x, y in zip(s1.rest, s2.rest))
    return AState(tuple(rep), frozenset(dis), lw, rest)


def leq(u: Universe, s1: AState | None, s2: AState | None) -> bool:
    """``s1`` is at least as precise as ``s2``."""
    if s1 is None:
        return True
    if s2 is None:
        return False
    return join(u, s1, s2) == s2
