"""Partition-refinement kernel for bisimulation checking.

One refinement round maps every state to the pair (current block, set of
``(label, successor block)``) and renumbers the distinct pairs in order of
first occurrence.  Two implementations give bit-identical results:

* a numba kernel (hash, sort, exact comparison of tied rows),
* a pure-numpy path (padded signature matrix and ``np.unique(axis=0)``).

Set ``MAPSEP_NO_NUMBA=1`` to force the numpy path.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised only when numba is missing
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

NUMBA_DISABLED = os.environ.get("MAPSEP_NO_NUMBA", "") not in ("", "0")
HAVE_NUMBA = njit is not None and not NUMBA_DISABLED


def csr(nstates: int, src: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row pointers and a permutation grouping transitions by source state."""
    order = np.argsort(src, kind="stable")
    counts = np.bincount(src, minlength=nstates)
    ptr = np.zeros(nstates + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, order


def _renumber(inverse: np.ndarray) -> np.ndarray:
    _, first = np.unique(inverse, return_index=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse]


def refine_numpy(ptr: np.ndarray, lab: np.ndarray, dst: np.ndarray, block: np.ndarray) -> np.ndarray:
    n = len(block)
    nb = int(block.max()) + 1 if n else 1
    codes = lab.astype(np.int64) * nb + block[dst]
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(ptr))
    o = np.lexsort((codes, rows))
    codes, rows = codes[o], rows[o]
    keep = np.ones(len(codes), dtype=bool)
    if len(codes):
        keep[1:] = (codes[1:] != codes[:-1]) | (rows[1:] != rows[:-1])
    codes, rows = codes[keep], rows[keep]
    lengths = np.bincount(rows, minlength=n)
    width = int(lengths.max()) if n and len(codes) else 0
    mat = np.full((n, width + 2), -1, dtype=np.int64)
    mat[:, 0] = block
    mat[:, 1] = lengths
    starts = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=starts[1:])
    cols = np.arange(len(codes)) - starts[rows] + 2
    mat[rows, cols] = codes
    _, inverse = np.unique(mat, axis=0, return_inverse=True)
    return _renumber(inverse.reshape(-1))


if HAVE_NUMBA:

    @njit(cache=True)
    def _signatures(ptr, lab, dst, block):  # pragma: no cover - compiled
        n = block.shape[0]
        nb = 1
        for k in range(n):
            if block[k] + 1 > nb:
                nb = block[k] + 1
        out = np.empty(ptr[n], dtype=np.int64)
        sptr = np.zeros(n + 1, dtype=np.int64)
        h = np.empty(n, dtype=np.uint64)
        pos = 0
        for s in range(n):
            lo, hi = ptr[s], ptr[s + 1]
            tmp = np.empty(hi - lo, dtype=np.int64)
            for k in range(lo, hi):
                tmp[k - lo] = lab[k] * nb + block[dst[k]]
            tmp.sort()
            x = np.uint64(1469598103934665603) ^ np.uint64(block[s])
            prev = -1
            for k in range(hi - lo):
                c = tmp[k]
                if k == 0 or c != prev:
                    out[pos] = c
                    pos += 1
                    x = (x ^ np.uint64(c)) * np.uint64(1099511628211)
                    x ^= x >> np.uint64(29)
                prev = c
            sptr[s + 1] = pos
            h[s] = x
        return out[:pos], sptr, h

    @njit(cache=True)
    def _same(block, sig, sptr, a, b):  # pragma: no cover - compiled
        if block[a] != block[b]:
            return False
        la = sptr[a + 1] - sptr[a]
        if la != sptr[b + 1] - sptr[b]:
            return False
        for k in range(la):
            if sig[sptr[a] + k] != sig[sptr[b] + k]:
                return False
        return True

    @njit(cache=True)
    def _group(block, sig, sptr, h):  # pragma: no cover - compiled
        n = block.shape[0]
        order = np.argsort(h, kind="mergesort")
        gid = np.empty(n, dtype=np.int64)
        ngroups = 0
        reps = np.empty(n, dtype=np.int64)
        k = 0
        while k < n:
            e = k
            while e < n and h[order[e]] == h[order[k]]:
                e += 1
            # exact comparison inside a run of equal hashes
            first_rep = 0
            nrep = 0
            for t in range(k, e):
                s = order[t]
                found = -1
                for r in range(nrep):
                    if _same(block, sig, sptr, reps[first_rep + r], s):
                        found = gid[reps[first_rep + r]]
                        break
                if found < 0:
                    reps[first_rep + nrep] = s
                    nrep += 1
                    gid[s] = ngroups
                    ngroups += 1
                else:
                    gid[s] = found
            k = e
        # renumber by first occurrence
        rank = np.full(ngroups, -1, dtype=np.int64)
        nxt = 0
        out = np.empty(n, dtype=np.int64)
        for s in range(n):
            g = gid[s]
            if rank[g] < 0:
                rank[g] = nxt
                nxt += 1
            out[s] = rank[g]
        return out

    def refine_numba(ptr, lab, dst, block):
        sig, sptr, h = _signatures(ptr, lab, dst, block)
        return _group(block, sig, sptr, h)

else:  # pragma: no cover
    refine_numba = None


def refine_step(ptr, lab, dst, block, use_numba: bool | None = None) -> np.ndarray:
    """One round of signature refinement; returns the renumbered block array.

    ``lab`` and ``dst`` must already be grouped by source (see :func:`csr`).
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        if refine_numba is None:
            raise RuntimeError("numba is not available")
        return refine_numba(ptr, lab, dst, block)
    return refine_numpy(ptr, lab, dst, block)


def coarsest_refinement(ptr, lab, dst, block, use_numba: bool | None = None) -> list[np.ndarray]:
    """Refine until stable; returns the block array of every round."""
    history = [np.asarray(block, dtype=np.int64)]
    count = int(history[-1].max()) + 1 if len(block) else 0
    while True:
        nxt = refine_step(ptr, lab, dst, history[-1], use_numba)
        c = int(nxt.max()) + 1 if len(nxt) else 0
        if c == count:
            return history
        history.append(nxt)
        count = c
