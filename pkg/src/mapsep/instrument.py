"""Ghost instrumentation: build P_pre with a last-write map ``a-lw`` per map ``a``.

Ghost stores ride on the same edge as the original command (a ``Seq``), so
each instrumented edge is still a single transition.  On edges leaving the
initial location the ``a-lw := const(@bot)`` initializations come *before*
the original command, so a write on such an edge is not erased.
"""

from __future__ import annotations

from .ivl.ast import (
    BOT,
    GHOST_SUFFIX,
    AssignMap,
    Command,
    ConstMap,
    HavocMap,
    IVLError,
    MapVar,
    Program,
    Seq,
    Statement,
    Store,
    WriteLit,
    check_well_formed,
    flatten,
    is_write,
)
from .ivl.normalize import needs_normalizing


def ghost(a: str) -> str:
    return a + GHOST_SUFFIX


def _seq(cmds: list[Command]) -> Command:
    flat = [x for c in cmds for x in flatten(c)]
    return flat[0] if len(flat) == 1 else Seq(tuple(flat))


def instrument_command(c: Command) -> Command:
    if isinstance(c, HavocMap):
        return Seq((c, AssignMap(ghost(c.var), ConstMap(WriteLit(BOT)))))
    if isinstance(c, AssignMap) and isinstance(c.expr, ConstMap):
        return Seq((c, AssignMap(ghost(c.target), ConstMap(WriteLit(BOT)))))
    if isinstance(c, AssignMap) and isinstance(c.expr, MapVar):
        return Seq((c, AssignMap(ghost(c.target), MapVar(ghost(c.expr.name)))))
    return c


def instrument_statement(s: Statement) -> Statement:
    if is_write(s.cmd):
        a = s.cmd.target
        idx = s.cmd.expr.updates[0][0]
        mark = AssignMap(ghost(a), Store(ghost(a), ((idx, WriteLit(s.id)),)))
        return Statement(s.src, Seq((s.cmd, mark)), s.dst, s.id)
    return Statement(s.src, instrument_command(s.cmd), s.dst, s.id)


def instrument(p: Program) -> Program:
    """Return the instrumented program P_pre (same locations and ids)."""
    if p.ghost_vars:
        raise IVLError("already-instrumented", "program already has ghost maps")
    if any(needs_normalizing(s.cmd) for s in p.statements):
        raise IVLError("not-normalized", "normalize the program before instrumenting")
    if not p.map_vars:
        return p
    inits = [AssignMap(ghost(a), ConstMap(WriteLit(BOT))) for a in p.map_vars]
    stmts = []
    for s in p.statements:
        t = instrument_statement(s)
        if s.src == p.initial:
            t = Statement(t.src, _seq(inits + [t.cmd]), t.dst, t.id)
        stmts.append(t)
    out = Program(
        locations=p.locations,
        statements=tuple(stmts),
        initial=p.initial,
        base_vars=p.base_vars,
        map_vars=p.map_vars,
        ghost_vars=tuple(ghost(a) for a in p.map_vars),
        families=p.families,
        error_locs=p.error_locs,
    )
    check_well_formed(out)
    return out
