"""Acceptance criteria 1-9.

Each test records one ``criterion N: PASS|FAIL ...`` line (printed in the
pytest terminal summary, or directly when this file is run as a script) and
then asserts the same condition.
"""

import math
import time

import numpy as np
import pytest

from moranifs import (WeightSequence, attractor_equation_gap, box_dim_formula, compose, cover, cutset, family_system, hausdorff_dim,
                      measure_class, sample_measure, solve_sk)
from moranifs.attractor import write_csv
from moranifs.dimension import _solve, box_count_empirical, grid_at_layers
from moranifs.separation import gamma2_mwhp, gamma3_mbdp, gamma4_neighbors, near_identity_gap
from moranifs.words import cylinder_weight, make_word

from helpers import brute_force_cutset, random_system

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

LOG2_3 = math.log(2) / math.log(3)


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_1_constant_systems():
    t0 = time.perf_counter()
    worst_closed, worst_newton = 0.0, 0.0
    for r in (1 / 3, 1 / 2, 1 / 4):
        for N in (2, 3, 4):
            sys = family_system("constant", r=r, N=N)
            want = math.log(N) / math.log(1 / r)
            tab = sys.ratio_table(100)
            for k in range(1, 101):
                worst_closed = max(worst_closed, abs(solve_sk(sys, k, tab) - want))
                # the generic root finder must agree with the closed form too
                worst_newton = max(worst_newton, abs(_solve(tab, k) - want))
    dt = time.perf_counter() - t0
    ok = worst_closed <= 1e-10 and worst_newton <= 1e-10 and dt < 1.0
    record(1, ok, f"max |s_k - lnN/ln(1/r)| = {worst_closed:.2e} (closed) / {worst_newton:.2e} (Newton), "
                  f"k<=100, 9 systems, {dt:.2f}s (< 1s)")
    assert ok


def test_criterion_2_ex53_psi():
    t0 = time.perf_counter()
    errs = {}
    for rho in (1.0, 0.5, 0.25):
        est = hausdorff_dim(family_system("ex53", rho=rho, form="psi"), 100_000).estimate
        errs[rho] = est - math.log(2) / (math.log(2) - math.log(rho))
    dt = time.perf_counter() - t0
    ok = all(abs(e) <= 1e-3 for e in errs.values()) and dt < 30
    record(2, ok, "dimH_est - ln2/(ln2-ln rho) at kmax=1e5: "
                  + ", ".join(f"rho={r:g}: {e:+.2e}" for r, e in errs.items()) + f"; {dt:.2f}s (< 30s)")
    assert ok


def test_criterion_3_ex55_trichotomy():
    t0 = time.perf_counter()
    want = {"up": "Zero", "down": "Infinite", "geometric": "PositiveFinite"}
    got, errs = {}, {}
    for rule in want:
        sys = family_system("ex55", a_rule=rule)
        got[rule] = measure_class(sys, LOG2_3).verdict
        errs[rule] = hausdorff_dim(sys, 200_000).estimate - LOG2_3
    dt = time.perf_counter() - t0
    ok = got == want and all(abs(e) <= 1e-4 for e in errs.values()) and dt < 10
    record(3, ok, "measure_class " + "/".join(got[r] for r in want)
                  + "; dimH_est - ln2/ln3 = " + ", ".join(f"{e:+.1e}" for e in errs.values())
                  + f" (kmax=2e5); {dt:.2f}s (< 10s)")
    assert ok


def test_criterion_4_ex57_box_dimensions():
    sys = family_system("ex57")
    ns = [2 ** m - 1 for m in range(1, 15)]
    est = box_dim_formula(sys, log_b_grid=grid_at_layers(sys, ns))
    lo_want = 3 * math.log(2) / (2 * math.log(3) + math.log(2))
    up_want = 3 * math.log(2) / (math.log(3) + 2 * math.log(2))
    ok = est.complete and abs(est.lower - lo_want) <= 0.01 and abs(est.upper - up_want) <= 0.01
    record(4, ok, f"lower {est.lower:.5f} (want {lo_want:.5f}), upper {est.upper:.5f} (want {up_want:.5f}), "
                  f"grid n=2^m-1, m<=14")
    assert ok


def test_criterion_5_ex58_anomaly():
    full = family_system("ex58", digits="full")
    # alternate between the ends of the long and short blocks so both extremes are sampled
    lb = []
    for n in range(1, 21):
        lb += [(-(2.0 ** n) + 1) * math.log(2), (-(2.0 ** (n + 1)) + 2) * math.log(2)]
    lb = np.array(lb)
    lb = lb[np.r_[True, np.diff(lb) < 0]]
    formula = box_dim_formula(full, log_b_grid=lb)
    sup_ratio = max(s.value for s in formula.samples)
    cloud = cover(full, 2.0 ** -14)
    bc = box_count_empirical(cloud, [2.0 ** -k for k in range(1, 13)])
    ends = hausdorff_dim(family_system("ex58", digits="endpoints"), 1000).estimate
    ok = sup_ratio >= 1.9 and abs(bc.slope - 1.0) <= 0.02 and ends <= 0.01
    record(5, ok, f"formula sup ln#A_b/-ln b = {sup_ratio:.4f} (>= 1.9); empirical slope {bc.slope:.4f} "
                  f"(1 +/- 0.02, {len(cloud)} cover points); endpoints dimH_est {ends:.2e} (<= 0.01)")
    assert ok


def test_criterion_6_separation_diagnostics():
    ex51 = family_system("ex51")
    g2 = gamma2_mwhp(ex51, [2.0 ** -n for n in range(1, 15)]).values
    g3 = gamma3_mbdp(ex51, 14).values
    r2, r3 = float(np.min(g2[1:] / g2[:-1])), float(np.min(g3[1:] / g3[:-1]))
    ex58 = family_system("ex58")
    grid58 = [2.0 ** -1, 2.0 ** -2, 2.0 ** -3, 2.0 ** -6, 2.0 ** -7, 2.0 ** -14]
    g4 = gamma4_neighbors(ex58, [b * (1 + 1e-9) for b in grid58]).values
    phi = family_system("ex53", rho=0.5, form="phi")
    ns = list(range(1, 13))
    near = near_identity_gap(phi, [2.0 ** (-2 * n) for n in ns], theta=[1 / (n + 1) for n in ns],
                             sigma=[[1] * (2 * n) for n in ns])
    need = [n * (1 - 0.5) / 2 for n in ns]
    q = [s.qualifying for s in near]
    ok_near = all(a >= b for a, b in zip(q, need))
    ok = r2 >= 1.2 and r3 >= 1.2 and g4.max() <= 3 and ok_near
    record(6, ok, f"ex51 min step ratio gamma2 {r2:.4f}, gamma3 {r3:.4f} (>= 1.2); "
                  f"ex58 max gamma4 {int(g4.max())} (<= 3); ex53-phi near-identity counts {q} (>= n/4)")
    assert ok


def test_criterion_7_cutset_oracle():
    rng = np.random.default_rng(20240607)
    mismatches, checked = 0, 0
    for _ in range(20):
        sys = random_system(rng, prefix_max=3, cycle_max=3)
        # b no smaller than the slowest 10-layer path, so every word has length <= 10
        floor = float(np.prod([max(m.ratio for m in sys.layer(n).maps) for n in range(1, 11)]))
        for b in np.exp(rng.uniform(math.log(floor), math.log(0.95), size=5)):
            got = sorted(w.digits for w in cutset(sys, float(b)).words)
            mismatches += got != brute_force_cutset(sys, float(b), 10)
            checked += 1
    ok = mismatches == 0 and checked == 100
    record(7, ok, f"{checked - mismatches}/{checked} cutsets equal brute-force filtering (20 systems x 5 b)")
    assert ok


def _cylinder_check(sys, count, seed):
    """Max |observed - expected| / sigma over all cylinders of length 1..3."""
    cloud = sample_measure(sys, None, count, 1e-9, seed)
    x = cloud.points
    worst = 0.0
    for L in (1, 2, 3):
        lays = [sys.layer(n) for n in range(1, L + 1)]
        words = list(np.ndindex(*[l.size for l in lays]))
        assigned = np.zeros(count, dtype=np.int64)
        for w in words:
            digits = tuple(j + 1 for j in w)
            p = math.exp(cylinder_weight(sys, sys.weights, digits))
            img = sys.ambient.hull_image(compose(sys, make_word(sys, digits)))
            slack = 1e-9 * sys.ambient.diameter
            inside = np.all((x >= img.lo - slack) & (x <= img.hi + slack), axis=1)
            assigned += inside
            k = int(inside.sum())
            sigma = math.sqrt(count * p * (1 - p))
            worst = max(worst, abs(k - count * p) / sigma)
        if not np.all(assigned == 1):
            return math.inf, cloud
    return worst, cloud


def test_criterion_8_sampler(tmp_path):
    systems = {
        "cantor": family_system("constant", r=1 / 3, N=2),
        "ex55-up": family_system("ex55", a_rule="up"),
        "ex55-down": family_system("ex55", a_rule="down"),
        "ex55-geometric/w=(0.3,0.7)": family_system("ex55", a_rule="geometric").with_weights(
            WeightSequence.explicit([], [[0.3, 0.7]])),
    }
    worst = {}
    for i, (name, sys) in enumerate(systems.items()):
        worst[name], _ = _cylinder_check(sys, 1_000_000, seed=100 + i)
    sys = systems["ex55-up"]
    a = sample_measure(sys, None, 1_000_000, 1e-9, seed=42, threads=1)
    b = sample_measure(sys, None, 1_000_000, 1e-9, seed=42)
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(a, pa)
    write_csv(b, pb)
    identical = a.points.tobytes() == b.points.tobytes() and pa.read_bytes() == pb.read_bytes()
    ok = all(v <= 4 for v in worst.values()) and identical
    record(8, ok, "max |count - N p| / sigma over length<=3 cylinders at N=1e6: "
                  + ", ".join(f"{k} {v:.2f}" for k, v in worst.items())
                  + f" (<= 4); reruns byte-identical: {identical}")
    assert ok


def test_criterion_9_attractor_equation():
    systems = {
        "cantor": family_system("constant", r=1 / 3, N=2),
        "ex55-up": family_system("ex55", a_rule="up"),
        "ex55-down": family_system("ex55", a_rule="down"),
        "ex55-geometric": family_system("ex55", a_rule="geometric"),
        "ex57": family_system("ex57"),
    }
    gaps = {k: attractor_equation_gap(s, 1e-3) for k, s in systems.items()}
    ok = all(g["ok"] for g in gaps.values())
    record(9, ok, "Hausdorff distance / bound 2b|X| at b=1e-3: "
                  + ", ".join(f"{k} {g['distance']:.1e}/{g['bound']:.0e}" for k, g in gaps.items()))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
