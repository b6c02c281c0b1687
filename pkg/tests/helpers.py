"""Shared builders and independent oracles for the test-suite."""

from __future__ import annotations

import itertools
import math

import numpy as np

from moranifs import Box, ContractionMap, explicit_system


def random_layer(rng, n_max=3, r_lo=0.2, r_hi=0.6):
    """1D layer of 2..n_max similarities with random ratios, packed into [0, 1]."""
    n = int(rng.integers(2, n_max + 1))
    while True:
        r = rng.uniform(r_lo, r_hi, size=n)
        if r.sum() < 1:
            break
    gaps = rng.dirichlet(np.ones(n + 1)) * (1 - r.sum())
    maps, x = [], 0.0
    for i in range(n):
        x += gaps[i]
        # x -> r (y + t) maps [0,1] to [x, x + r]
        maps.append(ContractionMap.similarity(float(r[i]), [x / r[i]]))
        x += r[i]
    return maps


def random_system(rng, prefix_max=2, cycle_max=3, **kw):
    prefix = [random_layer(rng, **kw) for _ in range(int(rng.integers(0, prefix_max + 1)))]
    cycle = [random_layer(rng, **kw) for _ in range(int(rng.integers(1, cycle_max + 1)))]
    return explicit_system(prefix, cycle, Box([0.0], [1.0]))


def brute_force_cutset(sys, b, depth):
    """Minimal words with prod(r) <= b, by filtering every word up to ``depth``.

    Plain float products, no log space, no pruning: a word is kept iff its own
    contraction is <= b and its parent's is > b.
    """
    ratios = [[m.ratio for m in sys.layer(n).maps] for n in range(1, depth + 1)]
    out = []
    for k in range(1, depth + 1):
        for word in itertools.product(*[range(len(r)) for r in ratios[:k]]):
            R = 1.0
            for lvl, j in enumerate(word[:-1]):
                R *= ratios[lvl][j]
            parent = R
            R *= ratios[k - 1][word[-1]]
            if R <= b < parent:
                out.append(tuple(j + 1 for j in word))
    return sorted(out)


def moran_root_bisect(log_r_layers, k, lo=0.0, hi=10.0):
    """Root of ``prod_{i<=k} sum_j r_{i,j}^s = 1`` by 200 bisection steps."""
    def F(s):
        return sum(math.log(sum(math.exp(s * lr) for lr in layer)) for layer in log_r_layers[:k])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if F(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cantor():
    from moranifs import family_system
    return family_system("constant", r=1 / 3, N=2)
