"""Compare the numba and numpy refinement kernels.

Two workloads: the union LTS that ``check_bisim`` refines for the benchmark
program before and after transformation, and random LTSs of growing size.
Both kernels must return identical block arrays; the script prints one CSV
row per workload.

    python3 benchmarks/bench_refine.py [--sizes 10000,100000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from mapsep import _kernels
from mapsep.bench import gen_benchmark, run_pipeline
from mapsep.equiv import _union
from mapsep.semantics import FiniteConfig, MarkerSpace, reach


def pipeline_union(k: int, n: int):
    rep = run_pipeline(gen_benchmark(k), f"bench-{k}")
    markers = MarkerSpace()
    cfg = FiniteConfig(n)
    l1 = reach(rep.instrumented, cfg, markers)
    l2 = reach(rep.output, cfg, markers)
    u = _union(l1, l2, list(rep.program.base_vars), frozenset())
    return u.ptr, u.lab, u.dst, u.block0


def random_lts(nstates: int, seed: int = 0, out_degree: int = 3, nlabels: int = 8, nblocks: int = 4):
    rng = np.random.default_rng(seed)
    src = np.repeat(np.arange(nstates, dtype=np.int64), out_degree)
    ptr, order = _kernels.csr(nstates, src)
    lab = rng.integers(0, nlabels, len(src), dtype=np.int64)[order]
    dst = rng.integers(0, nstates, len(src), dtype=np.int64)[order]
    block = rng.integers(0, nblocks, nstates, dtype=np.int64)
    return ptr, lab, dst, block


def timed(arrays, use_numba: bool, repeat: int):
    best, hist = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        hist = _kernels.coarsest_refinement(*arrays, use_numba=use_numba)
        best = min(best, time.perf_counter() - t)
    return best, hist


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="10000,100000,500000")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or MAPSEP_NO_NUMBA set); nothing to compare")

    workloads = [(f"bench k={k} |D|={n}", pipeline_union(k, n)) for k, n in ((2, 3), (4, 3), (2, 4))]
    workloads += [(f"random n={s}", random_lts(s)) for s in map(int, args.sizes.split(","))]

    # compile outside the timed runs
    _kernels.coarsest_refinement(*random_lts(50), use_numba=True)

    print("workload,states,transitions,rounds,numpy_s,numba_s,speedup")
    for name, arrays in workloads:
        t_np, h_np = timed(arrays, False, args.repeat)
        t_nb, h_nb = timed(arrays, True, args.repeat)
        assert len(h_np) == len(h_nb) and all(np.array_equal(a, b) for a, b in zip(h_np, h_nb)), name
        print(f"{name},{len(arrays[3])},{len(arrays[1])},{len(h_np)},{t_np:.4f},{t_nb:.4f},{t_np / t_nb:.1f}")


if __name__ == "__main__":
    main()
