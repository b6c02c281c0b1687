"""Compare the compiled and numpy kernels on representative workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time per backend and checks that both
backends return identical results.
"""

import argparse
import math
import time

import numpy as np

from moranifs import _backend, cutset, family_system
from moranifs.words import layer_arrays, scale_tol


def best_of(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cutset_case(name, b, **params):
    sys = family_system(name, **params)
    thr = math.log(b) + scale_tol(math.log(b))
    logd, sizes, _, _ = layer_arrays(sys, sys.depth_for_scale(thr))
    logd = np.ascontiguousarray(logd)

    def run(k):
        return lambda: k.enumerate_cutset(logd, sizes, thr, 50_000_000)

    def same(a, b):
        return a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    return f"cutset {name} b={b:g}", run, same


def neighbor_case(name, b, **params):
    cs = cutset(family_system(name, **params), b)
    lo, hi = cs.images()
    labels = cs.map_labels
    tol = 1e-12
    layout = _backend.spatial_layout(lo, hi, tol)

    def run(k):
        return lambda: k.neighbor_counts(lo, hi, labels, cs.count_maps, *layout, tol)
    return f"neighbors {name} W={len(cs)}", run, np.array_equal


def pairs_case(name, b, **params):
    cs = cutset(family_system(name, **params), b)
    lo, hi = cs.images()
    layout = _backend.spatial_layout(lo, hi, 1e-12)

    def run(k):
        return lambda: k.neighbor_pairs(lo, hi, *layout, 1e-12, 1 << 26)

    def same(a, b):
        return a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    return f"pairs {name} W={len(cs)}", run, same


def moran_case(kmax):
    tab = family_system("ex59").ratio_table(kmax)

    def run(k):
        return lambda: [k.moran_eval(tab.logr, tab.logm, tab.offsets, kmax, s) for s in np.linspace(0.1, 1, 50)]
    return f"moran_eval ex59 k={kmax} x50", run, lambda a, b: np.allclose(a, b, rtol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = _backend.get_kernels("python")
    try:
        cy = _backend.get_kernels("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    cases = [
        cutset_case("constant", 3.0 ** -17),
        cutset_case("ex59", 1e-5),
        cutset_case("ex57", 1e-5),
        neighbor_case("ex59", 1e-5),
        neighbor_case("ex58", 2.0 ** -14 * 1.0000001),
        pairs_case("ex53", 2.0 ** -14, rho=0.5, form="phi"),
        moran_case(100_000),
    ]
    print(f"{'workload':38s} {'python':>10s} {'cython':>10s} {'speedup':>8s}  same")
    for label, run, same in cases:
        tp, rp = best_of(run(py), args.repeat)
        tc, rc = best_of(run(cy), args.repeat)
        print(f"{label:38s} {tp * 1e3:9.2f}ms {tc * 1e3:9.2f}ms {tp / tc:7.1f}x  {same(rp, rc)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
