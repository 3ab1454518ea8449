"""Normalization: every store updates the assigned map at a single index."""

from __future__ import annotations

from .ast import AssignMap, MapVar, Program, Statement, Store, check_well_formed


def _split(cmd: AssignMap) -> list[AssignMap]:
    e = cmd.expr
    a = cmd.target
    out: list[AssignMap] = []
    if e.map != a:
        out.append(AssignMap(a, MapVar(e.map)))
    for idx, val in e.updates:
        out.append(AssignMap(a, Store(a, ((idx, val),))))
    return out


def needs_normalizing(cmd) -> bool:
    return (
        isinstance(cmd, AssignMap)
        and isinstance(cmd.expr, Store)
        and (cmd.expr.map != cmd.target or len(cmd.expr.updates) != 1)
    )


def normalize(p: Program) -> Program:
    """Rewrite ``a := b[i:=x]`` to ``a := b; a[i] := x`` and split store chains.

    Each extra command gets a fresh intermediate location ``<dst>_n<k>``.
    The first command of a split edge keeps the original statement id; the
    others are numbered from their fresh source locations.  Already-normal
    programs are returned unchanged.
    """
    if not any(needs_normalizing(s.cmd) for s in p.statements):
        return p
    locs = list(p.locations)
    taken = set(locs)
    stmts: list[Statement] = []
    counter = 0
    for s in p.statements:
        if not needs_normalizing(s.cmd):
            stmts.append(s)
            continue
        parts = _split(s.cmd)
        src = s.src
        for k, c in enumerate(parts):
            if k == len(parts) - 1:
                dst = s.dst
            else:
                while f"{s.src}_n{counter}" in taken:
                    counter += 1
                dst = f"{s.src}_n{counter}"
                taken.add(dst)
                locs.append(dst)
            sid = s.id if k == 0 else f"{src}#0"
            stmts.append(Statement(src, c, dst, sid))
            src = dst
    out = Program(
        locations=tuple(locs),
        statements=tuple(stmts),
        initial=p.initial,
        base_vars=p.base_vars,
        map_vars=p.map_vars,
        ghost_vars=p.ghost_vars,
        families=p.families,
        error_locs=p.error_locs,
    )
    check_well_formed(out)
    return out
