"""Deterministic pretty-printer emitting the explicit edge-list form."""

from __future__ import annotations

from .ast import (
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
    Store,
    Succ,
    Var,
    WriteLit,
)


def fmt_value(v) -> str:
    if isinstance(v, WriteLit):
        return "@bot" if v.wid == BOT else f"@{v.wid}"
    if isinstance(v, Lit):
        return str(v.value)
    return v


def fmt_base(e) -> str:
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Select):
        return f"{e.map}[{e.index}]"
    if isinstance(e, Succ):
        return f"succ({e.var})"
    if isinstance(e, Pred):
        return f"pred({e.var})"
    raise TypeError(e)


def fmt_map(e) -> str:
    if isinstance(e, MapVar):
        return e.name
    if isinstance(e, ConstMap):
        return f"const({fmt_value(e.value)})"
    if isinstance(e, Store):
        return e.map + "".join(f"[{i} := {fmt_value(v)}]" for i, v in e.updates)
    raise TypeError(e)


def fmt_bool(e) -> str:
    if isinstance(e, Eq):
        return f"{e.left} == {e.right}"
    if isinstance(e, Not):
        return f"!({fmt_bool(e.arg)})"
    if isinstance(e, And):
        return f"({fmt_bool(e.left)} && {fmt_bool(e.right)})"
    if isinstance(e, Or):
        return f"({fmt_bool(e.left)} || {fmt_bool(e.right)})"
    raise TypeError(e)


def fmt_command(c) -> str:
    if isinstance(c, AssignBase):
        return f"{c.target} := {fmt_base(c.expr)}"
    if isinstance(c, AssignMap):
        e = c.expr
        # the write sugar keeps printed programs close to the source form
        if isinstance(e, Store) and e.map == c.target and len(e.updates) == 1:
            i, v = e.updates[0]
            return f"{c.target}[{i}] := {fmt_value(v)}"
        return f"{c.target} := {fmt_map(e)}"
    if isinstance(c, HavocBase):
        return f"havoc {c.var}"
    if isinstance(c, HavocMap):
        return f"havoc {c.var}"
    if isinstance(c, HavocMapsEqual):
        return "havoc {" + ", ".join(c.vars) + "}"
    if isinstance(c, Assume):
        return f"assume {fmt_bool(c.cond)}"
    if isinstance(c, Skip):
        return "skip"
    if isinstance(c, Seq):
        return "{ " + " ".join(fmt_command(x) + ";" for x in c.cmds) + " }"
    raise TypeError(c)


def pretty(p: Program) -> str:
    lines = []
    if p.base_vars:
        lines.append(f"var {', '.join(p.base_vars)} : int;")
    if p.map_vars:
        lines.append(f"var {', '.join(p.map_vars)} : [int]int;")
    if p.ghost_vars:
        lines.append(f"var {', '.join(p.ghost_vars)} : [int]wid;")
    for origin, members in p.families:
        lines.append(f"family {origin} : {', '.join(members)};")
    lines.append(f"init {p.initial};")
    lines.append(f"locs {', '.join(p.locations)};")
    if p.error_locs:
        lines.append(f"error {', '.join(p.error_locs)};")
    for s in p.statements:
        lines.append(f"{s.src} -> {s.dst} : {fmt_command(s.cmd)};")
    return "\n".join(lines) + "\n"
