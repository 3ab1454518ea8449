"""Group write statements that may feed the same read."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

from .ivl.ast import BOT, Program, write_statements


def build_R(preimage: dict[str, frozenset]) -> frozenset:
    """Pairs of writes that occur together in some read's preimage (⊥ ignored)."""
    out = set()
    for pre in preimage.values():
        ws = sorted(w for w in pre if w != BOT)
        for w in ws:
            out.add((w, w))
        for a, b in combinations(ws, 2):
            out.add((a, b))
            out.add((b, a))
    return frozenset(out)


def block_name(members) -> str:
    """Canonical variable-name suffix of a block: its least member id."""
    return min(members).replace("#", "_")


@dataclass(frozen=True)
class Partition:
    """Blocks of write statement ids; ``{⊥}`` is kept implicitly as ``bot``."""

    blocks: tuple[frozenset, ...]

    def block_of(self, w: str) -> frozenset:
        for b in self.blocks:
            if w in b:
                return b
        raise KeyError(w)

    def name(self, block: frozenset) -> str:
        return "bot" if block == frozenset((BOT,)) else block_name(block)

    def containing(self, ws) -> frozenset | None:
        """The single block containing all of ``ws``, or ``None`` if they span blocks."""
        ws = [w for w in ws if w != BOT]
        if not ws:
            return None
        b = self.block_of(ws[0])
        return b if all(w in b for w in ws) else None

    def to_json(self) -> str:
        doc = [{"name": self.name(b), "writes": sorted(b)} for b in self.blocks]
        doc.append({"name": "bot", "writes": [BOT]})
        return json.dumps(doc, indent=2, ensure_ascii=False)


def partition(p: Program, R) -> Partition:
    """Connected components of ``R`` over the write statements of ``p``."""
    writes = sorted(s.id for s in write_statements(p))
    parent = {w: w for w in writes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in sorted(R):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, set] = {}
    for w in writes:
        groups.setdefault(find(w), set()).add(w)
    blocks = tuple(sorted((frozenset(g) for g in groups.values()), key=min))
    return Partition(blocks)


def check_refines(part: Partition, preimage: dict[str, frozenset]) -> list[str]:
    """Reads whose stripped preimage is not inside a single block."""
    bad = []
    for r, pre in sorted(preimage.items()):
        if any(w != BOT for w in pre) and part.containing(pre) is None:
            bad.append(r)
    return bad
