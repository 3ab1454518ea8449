"""Forward fixpoint analysis over instrumented programs.

:func:`analyze` computes one abstract state per location by round-robin
iteration in reverse postorder.  The lattice is finite for a fixed
program, so no widening is needed.  Each read ``x := a[i]`` gets a preimage:
the write-id set of ``a-lw[i]`` just before the read executes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..ivl.ast import (
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
    IVLError,
    Lit,
    MapVar,
    Not,
    Pred,
    Program,
    Select,
    Seq,
    Skip,
    Store,
    Succ,
    Var,
)
from .domain import AState, Universe, Work, join


def _ghost(a: str) -> str:
    return a + "-lw"


# ------------------------------------------------------------------ transfer


def _assign_base(w: Work, x: str, e) -> None:
    u = w.u
    if isinstance(e, Var):
        if e.name != x:
            w.havoc_var(x)
            w.merge(u.var[x], u.var[e.name])
    elif isinstance(e, Lit):
        w.havoc_var(x)
        w.merge(u.var[x], u.lit_term[e.value])
    elif isinstance(e, Select):
        w.havoc_var(x)
        t = u.sel.get((e.map, e.index))
        if e.index != x and t is not None:
            w.merge(u.var[x], t)
    elif isinstance(e, (Succ, Pred)):
        w.havoc_var(x)
    else:
        raise TypeError(e)


def _store(w: Work, a: str, i: str, x: str) -> None:
    u = w.u
    vi = u.var[i]
    strong, weak = [], []
    for j, t in u.sels_of_map.get(a, ()):
        vj = u.var[j]
        if w.eq(vi, vj):
            strong.append(t)
        elif not w.ne(vi, vj):
            weak.append(t)
    for t in strong + weak:
        w.havoc(t)
    for t in strong:
        w.merge(t, u.var[x])


def _ghost_store(w: Work, g: str, i: str, wid: str) -> None:
    u = w.u
    vi = u.var[i]
    for j, k in u.gsels_of_map.get(g, ()):
        vj = u.var[j]
        if w.eq(vi, vj):
            w.lw[k] = frozenset((wid,))
        elif not w.ne(vi, vj):
            w.lw[k] = w.lw[k] | {wid}
    gk = u.ghost_k[g]
    w.rest[gk] = w.rest[gk] | {wid}


def _copy_map(w: Work, a: str, b: str) -> None:
    """``a := b`` on base maps."""
    u = w.u
    if a == b:
        return
    for _, t in u.sels_of_map.get(a, ()):
        w.havoc(t)
    for j, t in u.sels_of_map.get(a, ()):
        s = u.sel.get((b, j))
        if s is not None:
            w.merge(t, s)


def _copy_ghost(w: Work, g: str, h: str) -> None:
    u = w.u
    if g == h:
        return
    lw = list(w.lw)
    for j, k in u.gsels_of_map.get(g, ()):
        src = u.gsel.get((h, j))
        w.lw[k] = lw[src] if src is not None else w.rest[u.ghost_k[h]]
    w.rest[u.ghost_k[g]] = w.rest[u.ghost_k[h]]


def _assign_map(w: Work, a: str, e) -> None:
    u = w.u
    if a in u.ghost_k:
        gk = u.ghost_k[a]
        if isinstance(e, ConstMap):
            val = frozenset((e.value.wid,))
            for _, k in u.gsels_of_map.get(a, ()):
                w.lw[k] = val
            w.rest[gk] = val
        elif isinstance(e, MapVar):
            _copy_ghost(w, a, e.name)
        elif isinstance(e, Store):
            _copy_ghost(w, a, e.map)
            for i, v in e.updates:
                _ghost_store(w, a, i, v.wid)
        else:
            raise TypeError(e)
        return
    if isinstance(e, ConstMap):
        for _, t in u.sels_of_map.get(a, ()):
            w.havoc(t)
            w.merge(t, u.lit_term[e.value.value])
    elif isinstance(e, MapVar):
        _copy_map(w, a, e.name)
    elif isinstance(e, Store):
        _copy_map(w, a, e.map)
        for i, v in e.updates:
            _store(w, a, i, v)
    else:
        raise TypeError(e)


def _havoc_maps(w: Work, names) -> None:
    u = w.u
    for a in names:
        if a in u.ghost_k:
            for _, k in u.gsels_of_map.get(a, ()):
                w.lw[k] = u.top_wids
            w.rest[u.ghost_k[a]] = u.top_wids
        else:
            for _, t in u.sels_of_map.get(a, ()):
                w.havoc(t)
    first = names[0]
    for a in names[1:]:
        if a in u.ghost_k:
            continue
        for j, t in u.sels_of_map.get(a, ()):
            s = u.sel.get((first, j))
            if s is not None:
                w.merge(t, s)


def assume(u: Universe, s: AState | None, e, positive: bool = True) -> AState | None:
    if s is None:
        return None
    if isinstance(e, Not):
        return assume(u, s, e.arg, not positive)
    if isinstance(e, Eq):
        w = Work(u, s)
        if positive:
            w.merge(u.var[e.left], u.var[e.right])
        else:
            w.add_diseq(u.var[e.left], u.var[e.right])
        w.close()
        return w.freeze()
    conj = isinstance(e, And) == positive
    if conj:
        return assume(u, assume(u, s, e.left, positive), e.right, positive)
    return join(u, assume(u, s, e.left, positive), assume(u, s, e.right, positive))


def preimage_of(u: Universe, s: AState | None, a: str, i: str) -> frozenset:
    """Possible values of ``a-lw[i]`` in ``s`` (empty if ``s`` is bottom)."""
    if s is None:
        return frozenset()
    g = _ghost(a)
    k = u.gsel.get((g, i))
    if k is not None:
        return s.lw[k]
    if g in u.ghost_k:
        return s.rest[u.ghost_k[g]]
    return u.top_wids


def transfer(u: Universe, c, s: AState | None, on_read=None) -> AState | None:
    """Abstract post of command ``c``.

    ``on_read(map, index, state)`` is called before every select is executed.
    """
    if s is None:
        return None
    if isinstance(c, Seq):
        for sub in c.cmds:
            s = transfer(u, sub, s, on_read)
        return s
    if isinstance(c, Assume):
        return assume(u, s, c.cond)
    if isinstance(c, Skip):
        return s
    if on_read is not None and isinstance(c, AssignBase) and isinstance(c.expr, Select):
        on_read(c.expr.map, c.expr.index, s)
    w = Work(u, s)
    if isinstance(c, AssignBase):
        _assign_base(w, c.target, c.expr)
    elif isinstance(c, AssignMap):
        _assign_map(w, c.target, c.expr)
    elif isinstance(c, HavocBase):
        w.havoc_var(c.var)
    elif isinstance(c, HavocMap):
        _havoc_maps(w, (c.var,))
    elif isinstance(c, HavocMapsEqual):
        _havoc_maps(w, c.vars)
    else:
        raise TypeError(c)
    w.close()
    return w.freeze()


# ------------------------------------------------------------------- fixpoint


def reverse_postorder(p: Program) -> list[str]:
    succ: dict[str, list[str]] = {}
    for s in p.statements:
        succ.setdefault(s.src, []).append(s.dst)
    seen, order = set(), []
    stack = [(p.initial, iter(succ.get(p.initial, ())))]
    seen.add(p.initial)
    while stack:
        loc, it = stack[-1]
        for nxt in it:
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
                break
        else:
            order.append(loc)
            stack.pop()
    order.reverse()
    order += [loc for loc in p.locations if loc not in seen]
    return order


@dataclass
class AnalysisResult:
    universe: Universe
    states: dict[str, AState | None]
    preimage: dict[str, frozenset] = field(default_factory=dict)
    reads: dict[str, tuple[str, str]] = field(default_factory=dict)
    iterations: int = 0

    @property
    def lastwrites(self) -> frozenset:
        """The over-approximate Last Writes relation (pairs ``(w, r)``)."""
        return frozenset((w, r) for r, pre in self.preimage.items() for w in pre if w != BOT)

    def _term(self, name: str) -> int:
        u = self.universe
        if name in u.var:
            return u.var[name]
        if name.startswith("#"):
            return u.lit_term[int(name[1:])]
        return u.names.index(name)

    def equal(self, loc: str, x: str, y: str) -> bool:
        s = self.states[loc]
        return s is None or s.equal(self._term(x), self._term(y))

    def disequal(self, loc: str, x: str, y: str) -> bool:
        s = self.states[loc]
        return s is None or s.disequal(self._term(x), self._term(y))

    def lw_set(self, loc: str, a: str, i: str) -> frozenset:
        return preimage_of(self.universe, self.states[loc], a, i)

    def facts(self, loc: str) -> list[str] | None:
        """Human-readable constraints at ``loc`` (``None`` if unreachable)."""
        s = self.states[loc]
        if s is None:
            return None
        u = self.universe
        out = []
        classes: dict[int, list[int]] = {}
        for t, r in enumerate(s.rep):
            classes.setdefault(r, []).append(t)
        for r, ms in classes.items():
            if len(ms) > 1:
                out.append(" == ".join(u.names[t] for t in ms))
        for a, b in sorted(s.dis):
            if a > b or (a < len(u.lits) and b < len(u.lits)):
                continue
            out.append(f"{u.names[a]} != {u.names[b]}")
        for k, name in enumerate(u.gnames):
            if s.lw[k] != u.top_wids:
                out.append(f"{name} in {{{', '.join(sorted(s.lw[k]))}}}")
        return out

    def to_json(self) -> str:
        doc = {
            "locations": {loc: self.facts(loc) for loc in self.states},
            "preimage": {r: sorted(v) for r, v in sorted(self.preimage.items())},
            "lastwrites": [{"write": w, "read": r} for w, r in sorted(self.lastwrites)],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False)


def analyze(p_pre: Program, max_iterations: int | None = None) -> AnalysisResult:
    """Per-location over-approximation of the reachable states of ``p_pre``."""
    if p_pre.map_vars and not p_pre.ghost_vars:
        raise IVLError("not-instrumented", "analyze expects an instrumented program")
    u = Universe(p_pre)
    order = reverse_postorder(p_pre)
    out: dict[str, list] = {}
    for st in p_pre.statements:
        out.setdefault(st.src, []).append(st)
    states: dict[str, AState | None] = {loc: None for loc in p_pre.locations}
    states[p_pre.initial] = u.top()
    if max_iterations is None:
        # every update strictly grows a state in a finite lattice
        height = u.size * u.size + len(u.gnames) * len(u.top_wids) + len(u.ghosts) * len(u.top_wids) + 1
        max_iterations = height * (len(p_pre.statements) + 1) * 4
    # round-robin passes in reverse postorder; only dirty locations are visited
    dirty = {p_pre.initial}
    iterations = 0
    while dirty:
        for loc in order:
            if loc not in dirty:
                continue
            dirty.discard(loc)
            iterations += 1
            if iterations > max_iterations:
                raise RuntimeError("analysis exceeded its termination bound")
            for st in out.get(loc, ()):
                post = transfer(u, st.cmd, states[loc])
                if post is None:
                    continue
                new = join(u, states[st.dst], post)
                if new != states[st.dst]:
                    states[st.dst] = new
                    dirty.add(st.dst)
    res = AnalysisResult(u, states, iterations=iterations)
    for st in p_pre.statements:
        found = []

        def hook(a, i, s, found=found):
            if a in p_pre.map_vars:
                found.append((a, i, preimage_of(u, s, a, i)))

        transfer(u, st.cmd, states[st.src], hook)
        if not found:
            for c in (st.cmd.cmds if isinstance(st.cmd, Seq) else (st.cmd,)):
                if isinstance(c, AssignBase) and isinstance(c.expr, Select) and c.expr.map in p_pre.map_vars:
                    found.append((c.expr.map, c.expr.index, frozenset()))
        for a, i, pre in found:
            res.reads[st.id] = (a, i)
            res.preimage[st.id] = res.preimage.get(st.id, frozenset()) | pre
    return res


def satisfies(res: AnalysisResult, space, state) -> bool:
    """Whether a concrete state of the analyzed program lies in the abstract state at its location."""
    s = res.states.get(state.pc)
    if s is None:
        return False
    u = res.universe
    vals = [None] * u.size
    for c, t in u.lit_term.items():
        vals[t] = c
    for v, t in u.var.items():
        vals[t] = state.base[space.bidx[v]]
    for (a, i), t in u.sel.items():
        vals[t] = state.maps[space.midx[a]][vals[u.var[i]]]
    for t in range(u.size):
        if vals[t] != vals[s.rep[t]]:
            return False
    for a, b in s.dis:
        if vals[a] == vals[b]:
            return False
    for (g, i), k in u.gsel.items():
        if state.maps[space.midx[g]][vals[u.var[i]]] not in s.lw[k]:
            return False
    for g, k in u.ghost_k.items():
        if not set(state.maps[space.midx[g]]) <= s.rest[k]:
            return False
    return True


__all__ = [
    "AnalysisResult",
    "analyze",
    "assume",
    "preimage_of",
    "reverse_postorder",
    "satisfies",
    "transfer",
]
