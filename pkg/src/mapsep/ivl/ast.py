"""Abstract syntax of the map IVL: expressions, commands, statements, programs.

Every node is an immutable, hashable dataclass so programs can be compared
structurally and used as dictionary keys.  Base expressions only ever refer to
variables by name; map indices and stored values are variables, never compound
expressions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

#: The "no write" symbol of the ghost sort.
BOT = "⊥"

#: Suffix of ghost (last-write) maps.  Reserved in source programs.
GHOST_SUFFIX = "-lw"

#: Separator of block-family map names.  Reserved in source programs.
BLOCK_SEP = "__"


class IVLError(Exception):
    """A diagnostic about an IVL program.

    ``code`` is a stable machine-readable identifier (``syntax``,
    ``map-equality-assume``, ``edge-into-initial``, ...).
    """

    def __init__(self, code: str, message: str, line: int | None = None, col: int | None = None):
        self.code = code
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}[{code}] {message}")


# ---------------------------------------------------------------- expressions


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class WriteLit:
    """A literal of the ghost sort: a statement id, or :data:`BOT`."""

    wid: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Select:
    map: str
    index: str


@dataclass(frozen=True)
class Succ:
    """Saturating successor on the base domain (grammar extension)."""

    var: str


@dataclass(frozen=True)
class Pred:
    """Saturating predecessor on the base domain (grammar extension)."""

    var: str


BaseExpr = Union[Lit, Var, Select, Succ, Pred]


@dataclass(frozen=True)
class MapVar:
    name: str


@dataclass(frozen=True)
class Store:
    """``map[i1 := v1][i2 := v2]...``.

    After normalization every store has exactly one update and its base map is
    the assigned map.  A stored value is a base variable name, or a
    :class:`WriteLit` in ghost stores.
    """

    map: str
    updates: tuple[tuple[str, Union[str, WriteLit]], ...]


@dataclass(frozen=True)
class ConstMap:
    value: Union[Lit, WriteLit]


MapExpr = Union[MapVar, Store, ConstMap]


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Not:
    arg: "BoolExpr"


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"


BoolExpr = Union[Eq, Not, And, Or]


# ------------------------------------------------------------------- commands


@dataclass(frozen=True)
class AssignBase:
    target: str
    expr: BaseExpr


@dataclass(frozen=True)
class AssignMap:
    target: str
    expr: MapExpr


@dataclass(frozen=True)
class HavocBase:
    var: str


@dataclass(frozen=True)
class HavocMap:
    var: str


@dataclass(frozen=True)
class Assume:
    cond: BoolExpr


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Seq:
    """Atomic sequence of commands on one edge (IR only)."""

    cmds: tuple["Command", ...]


@dataclass(frozen=True)
class HavocMapsEqual:
    """Havoc all listed maps to one common arbitrary map (IR only)."""

    vars: tuple[str, ...]


Command = Union[AssignBase, AssignMap, HavocBase, HavocMap, Assume, Skip, Seq, HavocMapsEqual]


@dataclass(frozen=True)
class Statement:
    src: str
    cmd: Command
    dst: str
    id: str


# -------------------------------------------------------------------- program


@dataclass(frozen=True)
class Program:
    """A control-flow graph whose edges are statements.

    ``ghost_vars`` are maps of the write-id sort (``a-lw``).  ``families``
    lists groups of maps that start out equal: ``(origin, members)``; the
    members share the initial value the origin map would have had.
    """

    locations: tuple[str, ...]
    statements: tuple[Statement, ...]
    initial: str
    base_vars: tuple[str, ...] = ()
    map_vars: tuple[str, ...] = ()
    ghost_vars: tuple[str, ...] = ()
    families: tuple[tuple[str, tuple[str, ...]], ...] = ()
    error_locs: tuple[str, ...] = ()
    _by_id: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {s.id: s for s in self.statements})

    def statement(self, sid: str) -> Statement:
        return self._by_id[sid]

    def outgoing(self, loc: str) -> list[Statement]:
        return [s for s in self.statements if s.src == loc]

    @property
    def all_map_vars(self) -> tuple[str, ...]:
        return self.map_vars + self.ghost_vars

    def family_of(self, name: str) -> str | None:
        for origin, members in self.families:
            if name in members:
                return origin
        return None


# -------------------------------------------------------------------- helpers


def number_statements(edges: Iterable[tuple[str, Command, str]]) -> tuple[Statement, ...]:
    """Assign ids ``<src>#<k>``, ``k`` counting outgoing edges of ``src`` in order."""
    counters: dict[str, int] = {}
    out = []
    for src, cmd, dst in edges:
        k = counters.get(src, 0)
        counters[src] = k + 1
        out.append(Statement(src, cmd, dst, f"{src}#{k}"))
    return tuple(out)


def is_write(cmd: Command) -> bool:
    """``a := a[i := x]`` with a single update and a variable value."""
    return (
        isinstance(cmd, AssignMap)
        and isinstance(cmd.expr, Store)
        and cmd.expr.map == cmd.target
        and len(cmd.expr.updates) == 1
        and isinstance(cmd.expr.updates[0][1], str)
    )


def is_read(cmd: Command) -> bool:
    return isinstance(cmd, AssignBase) and isinstance(cmd.expr, Select)


def write_statements(p: Program) -> list[Statement]:
    return [s for s in p.statements if is_write(s.cmd) and s.cmd.target in p.map_vars]


def read_statements(p: Program) -> list[Statement]:
    return [s for s in p.statements if is_read(s.cmd) and s.cmd.expr.map in p.map_vars]


def flatten(cmd: Command) -> Iterator[Command]:
    if isinstance(cmd, Seq):
        for c in cmd.cmds:
            yield from flatten(c)
    else:
        yield cmd


def bool_vars(e: BoolExpr) -> set[str]:
    if isinstance(e, Eq):
        return {e.left, e.right}
    if isinstance(e, Not):
        return bool_vars(e.arg)
    return bool_vars(e.left) | bool_vars(e.right)


def command_vars(cmd: Command) -> tuple[set[str], set[str]]:
    """(base variables, map variables) occurring in ``cmd``."""
    base: set[str] = set()
    maps: set[str] = set()
    for c in flatten(cmd):
        if isinstance(c, AssignBase):
            base.add(c.target)
            e = c.expr
            if isinstance(e, Var):
                base.add(e.name)
            elif isinstance(e, Select):
                maps.add(e.map)
                base.add(e.index)
            elif isinstance(e, (Succ, Pred)):
                base.add(e.var)
        elif isinstance(c, AssignMap):
            maps.add(c.target)
            e = c.expr
            if isinstance(e, MapVar):
                maps.add(e.name)
            elif isinstance(e, Store):
                maps.add(e.map)
                for i, v in e.updates:
                    base.add(i)
                    if isinstance(v, str):
                        base.add(v)
        elif isinstance(c, HavocBase):
            base.add(c.var)
        elif isinstance(c, HavocMap):
            maps.add(c.var)
        elif isinstance(c, HavocMapsEqual):
            maps.update(c.vars)
        elif isinstance(c, Assume):
            base |= bool_vars(c.cond)
    return base, maps


def literals(p: Program) -> set[int]:
    """Base-sort literal values occurring in ``p``."""
    out: set[int] = set()
    for s in p.statements:
        for c in flatten(s.cmd):
            if isinstance(c, AssignBase) and isinstance(c.expr, Lit):
                out.add(c.expr.value)
            elif isinstance(c, AssignMap) and isinstance(c.expr, ConstMap) and isinstance(c.expr.value, Lit):
                out.add(c.expr.value.value)
    return out


def uses_arith(p: Program) -> bool:
    return any(
        isinstance(c, AssignBase) and isinstance(c.expr, (Succ, Pred))
        for s in p.statements
        for c in flatten(s.cmd)
    )


def check_well_formed(p: Program) -> None:
    """Raise :class:`IVLError` unless ``p`` satisfies the program invariants."""
    locs = set(p.locations)
    if len(locs) != len(p.locations):
        raise IVLError("duplicate-location", "location listed twice")
    if p.initial not in locs:
        raise IVLError("unknown-location", f"initial location {p.initial!r} not declared")
    declared = list(p.base_vars) + list(p.map_vars) + list(p.ghost_vars)
    if len(set(declared)) != len(declared):
        raise IVLError("duplicate-declaration", "variable declared twice or as both base and map")
    base, maps = set(p.base_vars), set(p.map_vars) | set(p.ghost_vars)
    seen_ids = set()
    for s in p.statements:
        if s.id in seen_ids:
            raise IVLError("duplicate-statement-id", f"statement id {s.id!r} used twice")
        seen_ids.add(s.id)
        if s.src not in locs or s.dst not in locs:
            raise IVLError("unknown-location", f"statement {s.id} uses an undeclared location")
        if s.dst == p.initial:
            raise IVLError("edge-into-initial", f"statement {s.id} enters the initial location {p.initial}")
        b, m = command_vars(s.cmd)
        for v in b:
            if v not in base:
                kind = "map" if v in maps else "undeclared"
                raise IVLError("undeclared-variable" if kind == "undeclared" else "type-error",
                               f"{v!r} used as a base variable in {s.id}")
        for v in m:
            if v not in maps:
                kind = "base" if v in base else "undeclared"
                raise IVLError("undeclared-variable" if kind == "undeclared" else "type-error",
                               f"{v!r} used as a map variable in {s.id}")
    for origin, members in p.families:
        for mname in members:
            if mname not in p.map_vars:
                raise IVLError("undeclared-variable", f"family member {mname!r} is not a map variable")
