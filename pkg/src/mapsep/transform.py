"""Rewrite a program so each block of writes uses its own copy of the map.

For every map ``a`` the output declares the family ``a__bot`` plus ``a__<B>``
for each block ``B`` that holds a write to a map of ``a``'s copy class (maps
linked by ``b := a``).  The family members start out equal.
"""

from __future__ import annotations

from .ivl.ast import (
    BLOCK_SEP,
    BOT,
    AssignBase,
    AssignMap,
    ConstMap,
    HavocMap,
    HavocMapsEqual,
    IVLError,
    MapVar,
    Program,
    Select,
    Seq,
    Statement,
    Store,
    check_well_formed,
    is_write,
    write_statements,
)
from .partition import Partition


class InconsistentPartition(IVLError):
    def __init__(self, message: str):
        super().__init__("inconsistent-partition", message)


def copy_classes(p: Program) -> dict[str, str]:
    """Map each map variable to the least member of its ``b := a`` class."""
    parent = {a: a for a in p.map_vars}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for s in p.statements:
        c = s.cmd
        if isinstance(c, AssignMap) and isinstance(c.expr, (MapVar, Store)):
            other = c.expr.name if isinstance(c.expr, MapVar) else c.expr.map
            ra, rb = find(c.target), find(other)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        elif isinstance(c, HavocMapsEqual):
            for v in c.vars[1:]:
                ra, rb = find(c.vars[0]), find(v)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    return {a: find(a) for a in p.map_vars}


def families(p: Program, part: Partition) -> dict[str, list[str]]:
    """Block names (``bot`` first) used by each map."""
    cls = copy_classes(p)
    names: dict[str, set[str]] = {}
    for s in write_statements(p):
        names.setdefault(cls[s.cmd.target], set()).add(part.name(part.block_of(s.id)))
    return {a: ["bot"] + sorted(names.get(cls[a], ())) for a in p.map_vars}


def member(a: str, block: str) -> str:
    return f"{a}{BLOCK_SEP}{block}"


def transform(p: Program, part: Partition, preimage: dict[str, frozenset]) -> Program:
    """The block-separated program P′ (same locations, edges and statement ids)."""
    if not p.map_vars:
        return p
    fam = families(p, part)
    stmts = []
    for s in p.statements:
        c = s.cmd
        if is_write(c):
            b = part.name(part.block_of(s.id))
            i, x = c.expr.updates[0]
            t = member(c.target, b)
            new = AssignMap(t, Store(t, ((i, x),)))
        elif isinstance(c, AssignBase) and isinstance(c.expr, Select):
            pre = preimage.get(s.id)
            if pre is None:
                raise InconsistentPartition(f"no preimage for read {s.id}")
            stripped = [w for w in pre if w != BOT]
            if not stripped:
                b = "bot"
            else:
                blk = part.containing(stripped)
                if blk is None:
                    raise InconsistentPartition(f"preimage of {s.id} spans several blocks")
                b = part.name(blk)
                if b not in fam[c.expr.map]:
                    raise InconsistentPartition(f"read {s.id} is fed by writes to an unrelated map")
            new = AssignBase(c.target, Select(member(c.expr.map, b), c.expr.index))
        elif isinstance(c, AssignMap) and isinstance(c.expr, MapVar):
            new = Seq(tuple(AssignMap(member(c.target, b), MapVar(member(c.expr.name, b))) for b in fam[c.target]))
        elif isinstance(c, AssignMap) and isinstance(c.expr, ConstMap):
            new = Seq(tuple(AssignMap(member(c.target, b), c.expr) for b in fam[c.target]))
        elif isinstance(c, HavocMap):
            new = HavocMapsEqual(tuple(member(c.var, b) for b in fam[c.var]))
        elif isinstance(c, (AssignMap, Seq, HavocMapsEqual)):
            raise IVLError("not-normalized", f"statement {s.id} is not in source normal form")
        else:
            new = c
        if isinstance(new, Seq) and len(new.cmds) == 1:
            new = new.cmds[0]
        stmts.append(Statement(s.src, new, s.dst, s.id))
    map_vars = tuple(member(a, b) for a in p.map_vars for b in fam[a])
    out = Program(
        locations=p.locations,
        statements=tuple(stmts),
        initial=p.initial,
        base_vars=p.base_vars,
        map_vars=map_vars,
        families=tuple((a, tuple(member(a, b) for b in fam[a])) for a in p.map_vars),
        error_locs=p.error_locs,
    )
    check_well_formed(out)
    return out


__all__ = ["InconsistentPartition", "copy_classes", "families", "member", "transform"]
