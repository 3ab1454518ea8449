"""Concrete semantics over a finite base domain ``D = {0..n-1}``.

States are ``State(pc, base, maps)`` tuples.  Base values are ints in ``D``;
map values are tuples of length ``n``; ghost maps hold statement ids or
:data:`~mapsep.ivl.ast.BOT`.

Initial values are *lazy*: instead of enumerating every initial valuation,
each unread initial value is a marker (a negative int) naming the variable
or map cell it came from.  A marker is resolved by case split the first time
a command inspects it (as an index, in ``==``, or under ``succ``/``pred``); the
split substitutes the chosen value everywhere in the state, so copies of one
initial value stay equal.  A symbolic state stands for all its marker
instantiations, and the set of instantiations of ``reach`` is exactly the
concrete reachable set.  Members of a map family share the markers of their
origin map, which makes them start out equal.

With ``lazy_havoc`` a map havoc also produces markers instead of all ``n**n``
maps.  They are keyed by the havoc statement, so a havoc that runs again
while its previous markers are still live first resolves those by splitting.

In tagged mode every base-map cell is a pair ``(value, tag)`` where ``tag`` is
the id of the write statement that stored it (or ``BOT``); base variables stay
plain because a store always re-tags.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .ivl.ast import (
    BOT,
    And,
    Assume,
    AssignBase,
    AssignMap,
    ConstMap,
    Eq,
    HavocBase,
    HavocMap,
    HavocMapsEqual,
    Lit,
    MapVar,
    Not,
    Or,
    Pred,
    Program,
    Select,
    Seq,
    Skip,
    Statement,
    Store,
    Succ,
    Var,
    WriteLit,
    literals,
)


class StateSpaceBudgetExceeded(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteConfig:
    domain: int = 3
    tagged: bool = False
    max_states: int = 1_000_000
    map_havoc_cap: int = 4
    symmetry: bool = False
    # havoc fills cells with fresh markers instead of enumerating every map;
    # exact for reachability, but split labels then differ from the eager form
    lazy_havoc: bool = False


class State(NamedTuple):
    pc: str
    base: tuple
    maps: tuple


class NeedValue(Exception):
    """Raised when a command inspects an unresolved marker."""

    def __init__(self, marker: int):
        self.marker = marker


class MarkerSpace:
    """Stable numbering of initial-value markers, shareable between programs."""

    def __init__(self):
        self._ids: dict[tuple, int] = {}
        self._keys: list[tuple] = []

    def marker(self, key: tuple) -> int:
        m = self._ids.get(key)
        if m is None:
            self._keys.append(key)
            m = -len(self._keys)
            self._ids[key] = m
        return m

    def key(self, m: int) -> tuple:
        return self._keys[-m - 1]

    def describe(self, m: int) -> str:
        k = self.key(m)
        if k[0] == "b":
            return f"init({k[1]})"
        if k[0] == "m":
            return f"init({k[1]}[{k[2]}])"
        if k[0] == "h":
            return f"havoc@{k[1]}({k[2]}[{k[3]}])"
        return f"anon{k[1]}"


def is_marker(v) -> bool:
    return type(v) is int and v < 0


class Space:
    """Executable semantics of one program at one finite configuration."""

    def __init__(self, p: Program, cfg: FiniteConfig = FiniteConfig(), markers: MarkerSpace | None = None):
        n = cfg.domain
        if n < 1:
            raise ConfigError("domain size must be positive")
        bad = [v for v in literals(p) if v >= n]
        if bad:
            raise ConfigError(f"literal {max(bad)} is outside the domain of size {n}")
        self.p = p
        self.cfg = cfg
        self.n = n
        self.tagged = cfg.tagged
        self.markers = markers if markers is not None else MarkerSpace()
        self.bidx = {v: k for k, v in enumerate(p.base_vars)}
        maps = p.map_vars + p.ghost_vars
        self.midx = {v: k for k, v in enumerate(maps)}
        self.ghost = frozenset(p.ghost_vars)
        self.ghost_k = frozenset(self.midx[g] for g in p.ghost_vars)
        self.nbase = len(p.base_vars)
        self.nmaps = len(maps)

    # ------------------------------------------------------------- states

    def initial_state(self) -> State:
        mk = self.markers.marker
        base = tuple(mk(("b", v)) for v in self.p.base_vars)
        maps = []
        for a in self.p.map_vars + self.p.ghost_vars:
            if a in self.ghost:
                maps.append((BOT,) * self.n)
                continue
            origin = self.p.family_of(a) or a
            cells = tuple(mk(("m", origin, j)) for j in range(self.n))
            if self.tagged:
                cells = tuple((c, BOT) for c in cells)
            maps.append(cells)
        return State(self.p.initial, base, tuple(maps))

    def markers_of(self, s: State) -> list[int]:
        seen = dict.fromkeys(v for v in s.base if is_marker(v))
        for k, cells in enumerate(s.maps):
            for c in cells:
                v = c[0] if type(c) is tuple else c
                if is_marker(v):
                    seen[v] = None
        return list(seen)

    def subst(self, s: State, m: int, d: int) -> State:
        base = tuple(d if v == m else v for v in s.base)
        maps = []
        for k, cells in enumerate(s.maps):
            if self.tagged and k not in self.ghost_k:
                maps.append(tuple((d, t) if v == m else (v, t) for v, t in cells))
            else:
                maps.append(tuple(d if c == m else c for c in cells))
        return State(s.pc, base, tuple(maps))

    def concretize(self, s: State):
        """All concrete states denoted by ``s``."""
        ms = self.markers_of(s)
        for vals in itertools.product(range(self.n), repeat=len(ms)):
            t = s
            for m, d in zip(ms, vals):
                t = self.subst(t, m, d)
            yield t

    def concrete_initial_states(self):
        yield from self.concretize(self.initial_state())

    def lookup(self, s: State, name: str):
        if name in self.bidx:
            return s.base[self.bidx[name]]
        return s.maps[self.midx[name]]

    # --------------------------------------------------------- evaluation

    def _conc(self, v) -> int:
        if v < 0:
            raise NeedValue(v)
        return v

    def _cell(self, c):
        return c[0] if self.tagged and type(c) is tuple else c

    def eval_base(self, base, maps, e):
        if isinstance(e, Var):
            return base[self.bidx[e.name]]
        if isinstance(e, Select):
            i = self._conc(base[self.bidx[e.index]])
            return self._cell(maps[self.midx[e.map]][i])
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Succ):
            return min(self._conc(base[self.bidx[e.var]]) + 1, self.n - 1)
        if isinstance(e, Pred):
            return max(self._conc(base[self.bidx[e.var]]) - 1, 0)
        raise TypeError(e)

    def eval_bool(self, base, e) -> bool:
        if isinstance(e, Eq):
            x = base[self.bidx[e.left]]
            y = base[self.bidx[e.right]]
            if x == y:
                return True
            if x < 0:
                raise NeedValue(x)
            if y < 0:
                raise NeedValue(y)
            return False
        if isinstance(e, Not):
            return not self.eval_bool(base, e.arg)
        if isinstance(e, And):
            return self.eval_bool(base, e.left) and self.eval_bool(base, e.right)
        if isinstance(e, Or):
            return self.eval_bool(base, e.left) or self.eval_bool(base, e.right)
        raise TypeError(e)

    def eval_map(self, base, maps, e, target: str, sid: str):
        ghost = target in self.ghost
        if isinstance(e, MapVar):
            return maps[self.midx[e.name]]
        if isinstance(e, ConstMap):
            v = e.value
            if isinstance(v, WriteLit):
                return (v.wid,) * self.n
            return ((v.value, BOT) if self.tagged and not ghost else v.value,) * self.n
        if isinstance(e, Store):
            cells = list(maps[self.midx[e.map]])
            for idx, val in e.updates:
                i = self._conc(base[self.bidx[idx]])
                if isinstance(val, WriteLit):
                    cells[i] = val.wid
                else:
                    x = base[self.bidx[val]]
                    cells[i] = (x, sid) if self.tagged and not ghost else x
            return tuple(cells)
        raise TypeError(e)

    def eval(self, s: State, e):
        """Evaluate a base, map or Boolean expression in ``s``."""
        if isinstance(e, (Eq, Not, And, Or)):
            return self.eval_bool(s.base, e)
        if isinstance(e, (MapVar, ConstMap, Store)):
            return self.eval_map(s.base, s.maps, e, "", "")
        return self.eval_base(s.base, s.maps, e)

    # ----------------------------------------------------------- commands

    def _all_maps(self, ghost: bool):
        n = self.n
        if n > self.cfg.map_havoc_cap:
            raise ConfigError(f"map havoc needs |D| <= {self.cfg.map_havoc_cap}, got {n}")
        for vals in itertools.product(range(n), repeat=n):
            if self.tagged and not ghost:
                yield tuple((v, BOT) for v in vals)
            else:
                yield vals

    def exec_cmd(self, c, base: tuple, maps: tuple, sid: str) -> list[tuple[tuple, tuple]]:
        if isinstance(c, AssignBase):
            v = self.eval_base(base, maps, c.expr)
            b = list(base)
            b[self.bidx[c.target]] = v
            return [(tuple(b), maps)]
        if isinstance(c, AssignMap):
            v = self.eval_map(base, maps, c.expr, c.target, sid)
            m = list(maps)
            m[self.midx[c.target]] = v
            return [(base, tuple(m))]
        if isinstance(c, Assume):
            return [(base, maps)] if self.eval_bool(base, c.cond) else []
        if isinstance(c, HavocBase):
            k = self.bidx[c.var]
            return [(base[:k] + (d,) + base[k + 1:], maps) for d in range(self.n)]
        if isinstance(c, HavocMap) and self.cfg.lazy_havoc and c.var not in self.ghost:
            return [self._lazy_havoc(base, maps, (c.var,), sid)]
        if isinstance(c, HavocMapsEqual) and self.cfg.lazy_havoc:
            return [self._lazy_havoc(base, maps, c.vars, sid)]
        if isinstance(c, HavocMap):
            k = self.midx[c.var]
            ghost = c.var in self.ghost
            return [(base, maps[:k] + (v,) + maps[k + 1:]) for v in self._all_maps(ghost)]
        if isinstance(c, HavocMapsEqual):
            ks = [self.midx[v] for v in c.vars]
            out = []
            for v in self._all_maps(False):
                m = list(maps)
                for k in ks:
                    m[k] = v
                out.append((base, tuple(m)))
            return out
        if isinstance(c, Skip):
            return [(base, maps)]
        if isinstance(c, Seq):
            cur = [(base, maps)]
            for sub in c.cmds:
                nxt = []
                for b, m in cur:
                    nxt.extend(self.exec_cmd(sub, b, m, sid))
                cur = nxt
            return cur
        raise TypeError(c)

    def _lazy_havoc(self, base, maps, names, sid):
        """Fill ``names`` with markers owned by this statement and map.

        A marker left over from an earlier execution of the same havoc is
        resolved first, so the reused marker cannot alias the old value.
        """
        origin = self.p.family_of(names[0]) or names[0]
        fresh = [self.markers.marker(("h", sid, origin, j)) for j in range(self.n)]
        live = set(fresh)
        for v in base:
            if v in live:
                raise NeedValue(v)
        for cells in maps:
            for c in cells:
                v = c[0] if type(c) is tuple else c
                if v in live:
                    raise NeedValue(v)
        cells = tuple((m, BOT) for m in fresh) if self.tagged else tuple(fresh)
        m = list(maps)
        for name in names:
            m[self.midx[name]] = cells
        return base, tuple(m)

    def step(self, s: State, stmt: Statement) -> list[tuple[tuple, State]]:
        """Successors of ``s`` under ``stmt`` as ``(split, state)`` pairs.

        ``split`` is the sorted tuple of ``(marker, value)`` case splits that
        were needed; concrete states always get ``()``.
        """
        if s.pc != stmt.src:
            return []
        out = []
        work = deque([((), s)])
        while work:
            split, cur = work.popleft()
            try:
                results = self.exec_cmd(stmt.cmd, cur.base, cur.maps, stmt.id)
            except NeedValue as nv:
                for d in range(self.n):
                    work.append((split + ((nv.marker, d),), self.subst(cur, nv.marker, d)))
                continue
            key = tuple(sorted(split))
            for b, m in results:
                out.append((key, State(stmt.dst, b, m)))
        return out

    def post(self, states, stmt: Statement) -> set[State]:
        """The post operator lifted to state sets."""
        out = set()
        for s in states:
            for _, t in self.step(s, stmt):
                out.add(t)
        return out


@dataclass
class LTS:
    """Reachable symbolic states with labeled transitions.

    Labels are ``(statement id, split)``.  ``pred[k]`` is the transition index
    through which state ``k`` was first discovered (``-1`` for initial states).
    """

    space: Space
    states: list[State]
    index: dict[State, int]
    initial: list[int]
    src: list[int] = field(default_factory=list)
    label: list[tuple] = field(default_factory=list)
    dst: list[int] = field(default_factory=list)
    pred: list[int] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def at(self, loc: str) -> list[int]:
        return [k for k, s in enumerate(self.states) if s.pc == loc]

    def locations(self) -> set[str]:
        return {s.pc for s in self.states}

    def trace_to(self, k: int) -> list[tuple]:
        """Labels along the discovery path from an initial state to ``k``."""
        out = []
        while self.pred[k] >= 0:
            t = self.pred[k]
            out.append(self.label[t])
            k = self.src[t]
        return out[::-1]

    def execution(self, k: int) -> tuple[State, list[tuple[Statement, State]]]:
        """Symbolic execution ``s0, (sigma0, s1), ...`` ending in state ``k``."""
        path = []
        while self.pred[k] >= 0:
            t = self.pred[k]
            path.append((self.space.p.statement(self.label[t][0]), self.states[k]))
            k = self.src[t]
        return self.states[k], path[::-1]

    def concrete_states(self) -> set[State]:
        out = set()
        for s in self.states:
            out.update(self.space.concretize(s))
        return out


def build_lts(space: Space, canon=None) -> LTS:
    """Explore all states reachable from the lazy initial state.

    ``canon`` optionally maps each state to a representative (symmetry
    reduction); it must be a symmetry of the transition relation.
    """
    p = space.p
    by_src: dict[str, list[Statement]] = {}
    for st in p.statements:
        by_src.setdefault(st.src, []).append(st)
    s0 = space.initial_state()
    if canon is not None:
        s0 = canon(s0)
    lts = LTS(space, [s0], {s0: 0}, [0], pred=[-1])
    budget = space.cfg.max_states
    queue = deque([0])
    while queue:
        k = queue.popleft()
        s = lts.states[k]
        for st in by_src.get(s.pc, ()):
            for split, t in space.step(s, st):
                if canon is not None:
                    t = canon(t)
                j = lts.index.get(t)
                if j is None:
                    j = len(lts.states)
                    if j >= budget:
                        raise StateSpaceBudgetExceeded(f"more than {budget} states")
                    lts.states.append(t)
                    lts.index[t] = j
                    lts.pred.append(len(lts.src))
                    queue.append(j)
                lts.src.append(k)
                lts.label.append((st.id, split))
                lts.dst.append(j)
    return lts


def reach(p: Program, cfg: FiniteConfig = FiniteConfig(), markers: MarkerSpace | None = None) -> LTS:
    """Reachable states of ``p`` (symbolic, see module docs) with transitions."""
    space = Space(p, cfg, markers)
    canon = None
    if cfg.symmetry:
        from .symmetry import canonicalizer

        canon = canonicalizer(space)
    return build_lts(space, canon)


def error_reachable(lts: LTS) -> bool:
    errs = set(lts.space.p.error_locs)
    return any(s.pc in errs for s in lts.states)


def lts_json(lts: LTS) -> str:
    """Canonical JSON dump of an explored system (states in discovery order)."""
    sp = lts.space
    p = sp.p
    names = p.map_vars + p.ghost_vars

    def val(v):
        if is_marker(v):
            return sp.markers.describe(v)
        if type(v) is tuple:
            return [val(v[0]), v[1]]
        return v

    states = []
    for s in lts.states:
        states.append({
            "pc": s.pc,
            "base": {v: val(s.base[k]) for k, v in enumerate(p.base_vars)},
            "maps": {a: [val(c) for c in s.maps[k]] for k, a in enumerate(names)},
        })
    trans = [
        {"src": a, "statement": lab[0], "split": {sp.markers.describe(m): d for m, d in lab[1]}, "dst": b}
        for a, lab, b in zip(lts.src, lts.label, lts.dst)
    ]
    doc = {"domain": sp.n, "initial": lts.initial, "states": states, "transitions": trans}
    return json.dumps(doc, indent=1, ensure_ascii=False)
