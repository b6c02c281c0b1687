"""Point clouds approximating the attractors and their invariant measures."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import LayerSystem, WeightSequence
from .words import DEFAULT_LIMIT, cutset, layer_arrays

COVER = "cover"
SAMPLE = "sample"
SAMPLE_BLOCK = 65536


@dataclass
class PointCloud:
    points: np.ndarray
    scale: float
    provenance: str
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


def default_anchor(sys: LayerSystem) -> np.ndarray:
    return sys.ambient.center


def _check_anchor(sys, anchor):
    a = default_anchor(sys) if anchor is None else np.asarray(anchor, dtype=float).reshape(-1)
    if a.shape != (sys.dimension,):
        raise ValueError(f"anchor has dimension {a.shape[0]}, system has {sys.dimension}")
    if not sys.ambient.contains_points(a)[0]:
        raise ValueError(f"anchor {a.tolist()} is outside the ambient box")
    return a


def cover(sys: LayerSystem, b: float, anchor=None, limit: int = DEFAULT_LIMIT) -> PointCloud:
    """One point ``phi_{1,J}(anchor)`` per word of ``I_b``.

    ``scale`` is ``max_J R_J * |X|``, a bound on the Hausdorff distance to ``K_1``.
    """
    a = _check_anchor(sys, anchor)
    cs = cutset(sys, b, limit)
    pts = cs.points(a)
    scale = math.exp(float(cs.logR.max())) * sys.ambient.diameter
    return PointCloud(pts, scale, COVER, {"b": float(b), "words": len(cs)})


def _cdfs(sys: LayerSystem, w: WeightSequence, depth: int) -> list:
    out = []
    for n in range(1, depth + 1):
        lay = sys.layer(n)
        p = np.exp(w.log_probs(lay, n + sys.offset))
        c = np.cumsum(p)
        c /= c[-1]
        out.append(c)
    return out


def sample_digits(cdfs: list, count: int, seed: int, block: int) -> np.ndarray:
    """Digits ``(depth, count)`` for sample block ``block`` (0-based per layer)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
    u = rng.random((count, len(cdfs))).T  # sample-major, so shorter runs are prefixes
    out = np.empty(u.shape, dtype=np.int64)
    for i, c in enumerate(cdfs):
        out[i] = np.minimum(np.searchsorted(c, u[i], side="right"), c.shape[0] - 1)
    return out


def push_digits(tables: tuple, digits: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    """Apply ``phi_{1,j_1} o ... o phi_{m,j_m}`` to ``anchor``, innermost first."""
    logd, _, offs, orth = tables
    depth, count = digits.shape
    x = np.tile(anchor, (count, 1))
    for lvl in range(depth - 1, -1, -1):
        j = digits[lvl]
        if orth is None:
            x = np.exp(logd[lvl, j]) * x + offs[lvl, j]
        else:
            x = np.exp(logd[lvl, j]) * np.einsum("wab,wb->wa", orth[lvl, j], x) + offs[lvl, j]
    return x


def sample_measure(sys: LayerSystem, w: WeightSequence | None, count: int, eps: float, seed: int,
                   anchor=None, threads: int | None = None) -> PointCloud:
    """Draw ``count`` points of the invariant measure ``mu_1`` up to ``eps |X|``.

    Each point is a fresh word of depth ``m = min{k : prod c_2 <= eps}`` with
    independent digits per layer. Stream contract: block ``i`` of
    ``SAMPLE_BLOCK`` consecutive samples uses ``Philox(SeedSequence(seed,
    spawn_key=(i,)))`` and draws ``m`` uniforms per sample, sample by sample,
    so output does not depend on ``threads`` and a smaller ``count`` yields a
    prefix of a larger one.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0,1)")
    w = sys.weights if w is None else w
    a = _check_anchor(sys, anchor)
    depth = sys.depth_for_scale(math.log(eps))
    tables = layer_arrays(sys, depth)
    cdfs = _cdfs(sys, w, depth)
    nblocks = -(-count // SAMPLE_BLOCK)

    def run(i):
        n = min(SAMPLE_BLOCK, count - i * SAMPLE_BLOCK)
        return push_digits(tables, sample_digits(cdfs, n, seed, i), a)

    workers = threads or os.cpu_count() or 1
    if workers > 1 and nblocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, range(nblocks)))
    else:
        parts = [run(i) for i in range(nblocks)]
    pts = np.concatenate(parts)
    scale = math.exp(float(np.sum(sys.log_c2_prefix(depth)))) * sys.ambient.diameter
    return PointCloud(pts, scale, SAMPLE, {"eps": float(eps), "depth": depth, "seed": int(seed)})


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def attractor_equation_gap(sys: LayerSystem, b: float, anchor=None, limit: int = DEFAULT_LIMIT) -> dict:
    """Compare ``cover(b)`` with ``U_j phi_{1,j}(cover of the shifted system)``.

    Returns the Hausdorff distance and the bound ``2 b |X|``.
    """
    a = _check_anchor(sys, anchor)
    lhs = cover(sys, b, a, limit).points
    lay = sys.layer(1)
    b2 = min(b / lay.c2, 1.0)
    tail = cover(sys.shift(1), b2, a, limit).points
    logd, _, offs, orth = layer_arrays(sys, 1)
    parts = []
    for j in range(lay.size):
        x = tail if orth is None else tail @ orth[0, j].T
        parts.append(np.exp(logd[0, j]) * x + offs[0, j])
    rhs = np.concatenate(parts)
    dist = hausdorff_distance(lhs, rhs)
    bound = 2.0 * b * sys.ambient.diameter
    return {"distance": dist, "bound": bound, "ok": dist <= bound, "b": b}


# ---------------------------------------------------------------------------
# I/O


def write_csv(cloud: PointCloud, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\r\n")
        for p in cloud.points:
            wr.writerow([repr(float(v)) for v in p])


def read_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=float)


def write_binary(cloud: PointCloud, path) -> None:
    np.ascontiguousarray(cloud.points, dtype="<f8").tofile(path)


def read_binary(path, dimension: int) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(-1, dimension)
