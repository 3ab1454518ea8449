"""Random small programs for property tests and cross-checks."""

from __future__ import annotations

import random

from .ivl.ast import (
    And,
    Assume,
    AssignBase,
    AssignMap,
    ConstMap,
    Eq,
    HavocBase,
    HavocMap,
    Lit,
    MapVar,
    Not,
    Or,
    Pred,
    Program,
    Select,
    Skip,
    Store,
    Succ,
    Var,
    check_well_formed,
    number_statements,
)


def _bool(rng: random.Random, xs, depth=0):
    r = rng.random()
    if depth < 1 and r < 0.2:
        op = And if rng.random() < 0.5 else Or
        return op(_bool(rng, xs, depth + 1), _bool(rng, xs, depth + 1))
    e = Eq(rng.choice(xs), rng.choice(xs))
    return Not(e) if rng.random() < 0.5 else e


def _command(rng: random.Random, xs, maps, arith: bool, stores: bool):
    kinds = ["read"] * 4 + ["write"] * 4 + ["assign", "lit", "havoc", "havoc", "assume", "assume"]
    if len(maps) > 1:
        kinds += ["copy"]
    kinds += ["const", "havocmap", "skip"]
    if arith:
        kinds.append("arith")
    if stores and len(maps) > 1:
        kinds.append("xstore")
    k = rng.choice(kinds)
    x, y = rng.choice(xs), rng.choice(xs)
    a = rng.choice(maps)
    if k == "read":
        return AssignBase(x, Select(a, y))
    if k == "write":
        return AssignMap(a, Store(a, ((y, x),)))
    if k == "assign":
        return AssignBase(x, Var(y))
    if k == "lit":
        return AssignBase(x, Lit(rng.randint(0, 1)))
    if k == "havoc":
        return HavocBase(x)
    if k == "assume":
        return Assume(_bool(rng, xs))
    if k == "copy":
        b = rng.choice([m for m in maps if m != a])
        return AssignMap(a, MapVar(b))
    if k == "const":
        return AssignMap(a, ConstMap(Lit(rng.randint(0, 1))))
    if k == "havocmap":
        return HavocMap(a)
    if k == "arith":
        return AssignBase(x, (Succ if rng.random() < 0.5 else Pred)(y))
    if k == "xstore":
        b = rng.choice([m for m in maps if m != a])
        return AssignMap(a, Store(b, ((y, x),)))
    return Skip()


def random_program(
    seed: int,
    max_statements: int = 8,
    n_base: int = 3,
    n_maps: int = 2,
    arith: bool = True,
    stores: bool = True,
    loops: bool = True,
) -> Program:
    """A random well-formed program with at most ``max_statements`` edges."""
    rng = random.Random(seed)
    xs = ["x", "y", "z", "w"][:n_base]
    maps = ["a", "b"][: max(1, n_maps)]
    n_stmts = rng.randint(min(3, max_statements), max_statements)
    n_locs = rng.randint(2, max(2, n_stmts + 1))
    locs = [f"l{k}" for k in range(n_locs)]
    edges = []
    reached = ["l0"]
    for k in range(n_stmts):
        # mostly extend the latest chain so writes tend to reach reads
        src = reached[-1] if rng.random() < 0.7 else rng.choice(reached)
        if k < n_locs - 1:
            dst = locs[k + 1]
        elif loops:
            dst = rng.choice(locs[1:])
        else:
            later = locs[locs.index(src) + 1:]
            if not later:
                continue
            dst = rng.choice(later)
        if dst not in reached:
            reached.append(dst)
        edges.append((src, _command(rng, xs, maps, arith, stores), dst))
    edges.sort(key=lambda e: int(e[0][1:]))
    p = Program(
        locations=tuple(locs),
        statements=number_statements(edges),
        initial="l0",
        base_vars=tuple(xs),
        map_vars=tuple(maps),
    )
    check_well_formed(p)
    return p
