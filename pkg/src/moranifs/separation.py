"""Finite-depth separation diagnostics on axis-aligned boxes.

Verdicts are evidence up to a depth or scale, never proofs:

* ``HoldsUpToDepth`` / ``FailsAt`` for open-set and strong separation,
* ``Bounded`` / ``Unbounded`` / ``Inconclusive`` for the gamma sequences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .core import Box, LayerSystem
from .errors import CutsetLimitError, UnsupportedGeometryError
from .words import DEFAULT_LIMIT, AffineBatch, cutset, layer_arrays, scale_tol

HOLDS = "HoldsUpToDepth"
FAILS = "FailsAt"
INCONCLUSIVE = "Inconclusive"
BOUNDED = "Bounded"
UNBOUNDED = "Unbounded"

UNBOUNDED_THRESHOLD = 1e3
TOUCH_RTOL = 1e-12


@dataclass
class Verdict:
    status: str
    depth: int | None = None
    witness: dict | None = None
    detail: str = ""

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.depth is not None:
            out["depth"] = self.depth
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


# ---------------------------------------------------------------------------
# box sequences


class BoxSequence:
    """Layer-indexed open boxes (or finite unions of boxes) ``V_n``."""

    def __init__(self, fn: Callable[[int], list], label: str = "custom"):
        self._fn = fn
        self.label = label

    def boxes(self, n: int) -> list:
        out = self._fn(n)
        if out is None:
            raise ValueError(f"box sequence '{self.label}' has no box for layer {n}")
        return [out] if isinstance(out, Box) else list(out)

    @classmethod
    def constant(cls, boxes) -> "BoxSequence":
        boxes = [boxes] if isinstance(boxes, Box) else list(boxes)
        return cls(lambda n: boxes, "constant")

    @classmethod
    def explicit(cls, prefix, cycle) -> "BoxSequence":
        prefix = [[b] if isinstance(b, Box) else list(b) for b in prefix]
        cycle = [[b] if isinstance(b, Box) else list(b) for b in cycle]
        if not cycle:
            raise ValueError("cycle must be nonempty")

        def fn(n):
            p = len(prefix)
            return prefix[n - 1] if n <= p else cycle[(n - p - 1) % len(cycle)]
        return cls(fn, "explicit")

    @classmethod
    def from_system(cls, sys: LayerSystem) -> "BoxSequence":
        """The open sets shipped with a built-in family (ambient box otherwise)."""
        prov = sys.provider

        def fn(n):
            got = prov.open_set(n + sys.offset)
            return sys.ambient if got is None else got
        return cls(fn, f"{prov.name}-default")

    @classmethod
    def from_json(cls, doc) -> "BoxSequence":
        def parse(entry):
            if isinstance(entry, dict):
                return [Box(entry["lo"], entry["hi"])]
            return [Box(e["lo"], e["hi"]) for e in entry]
        if isinstance(doc, dict) and "cycle" in doc:
            return cls.explicit([parse(e) for e in doc.get("prefix", [])], [parse(e) for e in doc["cycle"]])
        return cls.constant(parse(doc.get("boxes", doc) if isinstance(doc, dict) else doc))


def _open_overlap(lo1, hi1, lo2, hi2, tol) -> np.ndarray:
    return np.all((np.maximum(lo1, lo2) < np.minimum(hi1, hi2) - tol), axis=-1)


def _layer_batch(sys: LayerSystem, n: int) -> AffineBatch:
    logd, sizes, offs, orth = layer_arrays(sys, 1, n)
    k = int(sizes[0])
    return AffineBatch(logd[0, :k].copy(), offs[0, :k].copy(), None if orth is None else orth[0, :k].copy())


def _abs_tol(sys: LayerSystem) -> float:
    return TOUCH_RTOL * max(1.0, sys.ambient.diameter)


# ---------------------------------------------------------------------------
# MOSC


@dataclass
class MoscResult:
    verdict: Verdict
    measures: list
    running_inf: list
    measure_bounded_below: bool

    def to_json(self) -> dict:
        return {"verdict": self.verdict.to_json(), "measure_trace": self.measures,
                "running_inf": self.running_inf, "measure_bounded_below": self.measure_bounded_below}


def check_mosc(sys: LayerSystem, V: BoxSequence | None = None, nmax: int = 16) -> MoscResult:
    """Verify ``phi_{n,j}(V_{n+1}) ⊆ V_n`` and open disjointness for ``n <= nmax``.

    Also traces ``L^d(V_n)``; ``measure_bounded_below`` is False when the
    trailing minimum falls below half of the leading one.
    """
    V = BoxSequence.from_system(sys) if V is None else V
    tol = _abs_tol(sys)
    measures = []
    verdict = Verdict(HOLDS, nmax)
    for n in range(1, nmax + 1):
        vn, vnext = V.boxes(n), V.boxes(n + 1)
        for b in vn:
            if not sys.ambient.contains(b):
                verdict = Verdict(FAILS, n, {"layer": n, "reason": "V_n not inside X", "box": b.to_json()})
                break
        if verdict.status == FAILS:
            break
        measures.append(float(sum(b.volume for b in vn)))
        batch = _layer_batch(sys, n)
        los, his, labels = [], [], []
        for b in vnext:
            lo, hi = batch.box_images(b.lo, b.hi)
            los.append(lo)
            his.append(hi)
            labels.append(np.arange(len(batch)))
        lo, hi, lab = np.concatenate(los), np.concatenate(his), np.concatenate(labels)
        inside = np.zeros(lo.shape[0], dtype=bool)
        for b in vn:
            inside |= np.all((lo >= b.lo - tol) & (hi <= b.hi + tol), axis=1)
        if not np.all(inside):
            i = int(np.nonzero(~inside)[0][0])
            verdict = Verdict(FAILS, n, {"layer": n, "reason": "containment", "map": int(lab[i]) + 1,
                                         "image": {"lo": lo[i].tolist(), "hi": hi[i].tolist()}})
            break
        status, pi, pj = _backend.neighbor_pairs(lo, hi, tol, 1 << 24)
        if status != 0:
            verdict = Verdict(INCONCLUSIVE, n, None, "too many candidate pairs")
            break
        diff = lab[pi] != lab[pj]
        pi, pj = pi[diff], pj[diff]
        ov = _open_overlap(lo[pi], hi[pi], lo[pj], hi[pj], tol)
        if np.any(ov):
            k = int(np.nonzero(ov)[0][0])
            a, b = int(pi[k]), int(pj[k])
            ja, jb = sorted((int(lab[a]) + 1, int(lab[b]) + 1))
            verdict = Verdict(FAILS, n, {
                "layer": n, "reason": "overlap", "pair": [ja, jb],
                "images": [{"lo": lo[a].tolist(), "hi": hi[a].tolist()},
                           {"lo": lo[b].tolist(), "hi": hi[b].tolist()}]})
            break
    if verdict.status == HOLDS:
        measures.append(float(sum(b.volume for b in V.boxes(nmax + 1))))
    running = np.minimum.accumulate(measures).tolist() if measures else []
    bounded = True
    if len(measures) >= 4:
        half = len(measures) // 2
        bounded = min(measures[half:]) >= 0.5 * min(measures[:half])
    return MoscResult(verdict, measures, running, bool(bounded))


# ---------------------------------------------------------------------------
# MSSC


def _cover_boxes(sys: LayerSystem, n: int, eps: float, limit: int):
    """Closed boxes ``phi_{n+1,J}(X)`` over ``I_eps`` of the tail system; they cover ``K_{n+1}``."""
    tail = sys.shift(n)
    cs = cutset(tail, eps, limit)
    return cs.images()


def check_mssc(sys: LayerSystem, nmax: int = 4, eps_list=None, limit: int = 1 << 20) -> Verdict:
    """Strong separation, layer by layer: ``phi_{n,i}(K_{n+1})`` pairwise disjoint.

    ``K_{n+1}`` is replaced by covers at successively finer scales. Disjoint
    covers prove separation at that layer; an intersection that survives the
    finest scale is reported as ``FailsAt`` with the touching boxes.
    """
    eps_list = [1.0, 2.0 ** -4, 2.0 ** -8, 2.0 ** -12, 2.0 ** -16] if eps_list is None else list(eps_list)
    tol = _abs_tol(sys)
    for n in range(1, nmax + 1):
        batch = _layer_batch(sys, n)
        sep = False
        last = None
        for eps in eps_list:
            try:
                clo, chi = _cover_boxes(sys, n, eps, limit) if eps < 1.0 else (
                    sys.ambient.lo[None, :], sys.ambient.hi[None, :])
            except CutsetLimitError:
                return Verdict(INCONCLUSIVE, n - 1, None, f"cover at eps={eps:g} exceeds limit at layer {n}")
            los, his, labs = [], [], []
            for j in range(len(batch)):
                sub = AffineBatch(np.repeat(batch.logs[j:j + 1], clo.shape[0], 0),
                                  np.repeat(batch.offset[j:j + 1], clo.shape[0], 0),
                                  None if batch.orth is None else np.repeat(batch.orth[j:j + 1], clo.shape[0], 0))
                lo, hi = _images_of_boxes(sub, clo, chi)
                los.append(lo)
                his.append(hi)
                labs.append(np.full(clo.shape[0], j))
            lo, hi, lab = np.concatenate(los), np.concatenate(his), np.concatenate(labs)
            status, pi, pj = _backend.neighbor_pairs(lo, hi, tol, 1 << 24)
            if status != 0:
                return Verdict(INCONCLUSIVE, n - 1, None, f"too many candidate pairs at layer {n}")
            cross = lab[pi] != lab[pj]
            if not np.any(cross):
                sep = True
                break
            k = int(np.nonzero(cross)[0][0])
            a, b = int(pi[k]), int(pj[k])
            last = {"layer": n, "eps": eps, "pair": sorted([int(lab[a]) + 1, int(lab[b]) + 1]),
                    "boxes": [{"lo": lo[a].tolist(), "hi": hi[a].tolist()},
                              {"lo": lo[b].tolist(), "hi": hi[b].tolist()}]}
        if not sep:
            return Verdict(FAILS, n, last, "closed covers still intersect at the finest scale")
    return Verdict(HOLDS, nmax)


def _images_of_boxes(batch: AffineBatch, lo, hi):
    """Image of box ``i`` under map ``i`` of ``batch``."""
    sc = np.exp(batch.logs)
    if batch.orth is not None:
        ok = np.all((np.abs(batch.orth) <= 1e-12) | (np.abs(np.abs(batch.orth) - 1) <= 1e-12))
        if not ok:
            raise UnsupportedGeometryError("rotated image of a box is not an axis-aligned box")
        p = np.round(batch.orth)
        lo = np.einsum("wab,wb->wa", p, lo)
        hi = np.einsum("wab,wb->wa", p, hi)
    y1 = sc * lo + batch.offset
    y2 = sc * hi + batch.offset
    return np.minimum(y1, y2), np.maximum(y1, y2)


# ---------------------------------------------------------------------------
# gamma sequences


@dataclass
class GammaResult:
    name: str
    samples: list  # (parameter, value)
    verdict: Verdict
    extra: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples], dtype=float)

    def to_json(self) -> dict:
        out = {"name": self.name, "samples": [[p, v] for p, v in self.samples],
               "verdict": self.verdict.to_json()}
        out.update(self.extra)
        return out


def growth_verdict(values, threshold: float = UNBOUNDED_THRESHOLD) -> Verdict:
    """Unbounded if the trailing half grows strictly past ``threshold``;
    Bounded if it does not exceed the leading half's maximum."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return Verdict(INCONCLUSIVE, detail="too few samples")
    half = v.size // 2
    tail = v[half:]
    sup = float(v.max())
    if np.all(np.diff(tail) > 0) and tail[-1] >= threshold:
        return Verdict(UNBOUNDED, detail=f"monotone growth to {tail[-1]:.6g}")
    if tail.max() <= v[:max(half, 1)].max() * (1 + 1e-9):
        return Verdict(BOUNDED, detail=f"sup {sup:.6g}", witness={"sup": sup})
    if np.all(np.diff(tail) > 0):
        return Verdict(INCONCLUSIVE, detail=f"growing, {tail[-1]:.6g} below threshold {threshold:g}")
    return Verdict(INCONCLUSIVE, detail="no plateau and no monotone growth")


def gamma2_mwhp(sys: LayerSystem, b_grid, limit: int = DEFAULT_LIMIT) -> GammaResult:
    """``gamma_2(b) = sup_{I,J in I_b} Lip(phi_J) / lip(phi_I)``.

    For composed diagonal maps the ratio ``|phi_J(x)-phi_J(y)| / |phi_I(x)-phi_I(y)|``
    is maximal along a coordinate axis, so the exact value is
    ``max_a (max_J log D_{J,a} - min_I log D_{I,a})``. The cruder
    ``max log R - min log r`` is reported alongside.
    """
    samples, crude = [], []
    for b in b_grid:
        try:
            cs = cutset(sys, b, limit)
        except CutsetLimitError:
            break
        logs = cs.affine.logs
        g = float(np.max(logs.max(axis=0) - logs.min(axis=0)))
        samples.append((float(b), math.exp(g)))
        crude.append(math.exp(float(cs.logR.max() - cs.logr.min())))
    v = growth_verdict([s[1] for s in samples])
    return GammaResult("gamma2", samples, v, {"upper_bound_samples": crude})


def gamma3_mbdp(sys: LayerSystem, depth: int) -> GammaResult:
    """``gamma_3(n) = sup_{J in Sigma^n} R_J / r_J`` without enumeration."""
    d = sys.dimension
    if sys.is_similarity(depth):
        vals = np.ones(depth)
    else:
        logd, sizes, _, _ = layer_arrays(sys, depth)
        best = np.zeros(depth)
        best[:] = -np.inf
        for a in range(d):
            for c in range(d):
                if a == c:
                    continue
                per = np.array([np.max(logd[i, :sizes[i], a] - logd[i, :sizes[i], c]) for i in range(depth)])
                best = np.maximum(best, np.cumsum(per))
        vals = np.exp(np.maximum(best, 0.0)) if d > 1 else np.ones(depth)
    samples = [(n, float(vals[n - 1])) for n in range(1, depth + 1)]
    return GammaResult("gamma3", samples, growth_verdict(vals))


def _boxes_for(cs, U: BoxSequence | None):
    """Image boxes of each word (several per word when ``U`` is a union)."""
    if U is None:
        lo, hi = cs.images()
        return lo, hi, np.arange(len(cs))
    lengths = cs.lengths
    los, his, owners = [], [], []
    for L in np.unique(lengths):
        idx = np.nonzero(lengths == L)[0]
        sub = AffineBatch(cs.affine.logs[idx], cs.affine.offset[idx],
                          None if cs.affine.orth is None else cs.affine.orth[idx])
        for box in U.boxes(int(L) + 1):
            lo, hi = sub.box_images(box.lo, box.hi)
            los.append(lo)
            his.append(hi)
            owners.append(idx)
    return np.concatenate(los), np.concatenate(his), np.concatenate(owners)


def neighbor_count_max(cs, dedup: bool, U: BoxSequence | None = None, backend=None) -> int:
    """``max_I #{J : phi_J(B) ∩ phi_I(B) ≠ ∅}`` with ``B = X`` or ``U_{|J|+1}``."""
    lo, hi, owner = _boxes_for(cs, U)
    if dedup:
        labels = cs.map_labels[owner]
        n_labels = cs.count_maps
    else:
        labels = owner
        n_labels = len(cs)
    tol = _abs_tol(cs.sys)
    counts = _backend.neighbor_counts(lo, hi, labels, n_labels, tol, backend)
    if U is None or lo.shape[0] == len(cs):
        return int(counts.max())
    # several boxes per word: merge counts by owner via explicit pairs
    status, pi, pj = _backend.neighbor_pairs(lo, hi, tol, 1 << 26, backend)
    if status != 0:
        raise CutsetLimitError(int(lo.shape[0]), 1 << 26, cs.b)
    a = np.concatenate([owner[pi], owner[pj], np.arange(len(cs))])
    bl = np.concatenate([labels[pj], labels[pi], (cs.map_labels if dedup else np.arange(len(cs)))])
    combo = np.unique(a.astype(np.int64) * n_labels + bl)
    return int(np.bincount(combo // n_labels).max())


def gamma4_neighbors(sys: LayerSystem, b_grid, limit: int = DEFAULT_LIMIT, dedup: bool = True,
                     U: BoxSequence | None = None) -> GammaResult:
    """Neighbor counts: gamma_4 (``dedup``), gamma_4' (words), gamma_1 (with ``U``)."""
    name = "gamma1" if U is not None else ("gamma4" if dedup else "gamma4_prime")
    samples = []
    stopped = None
    for b in b_grid:
        try:
            cs = cutset(sys, b, limit)
        except CutsetLimitError:
            stopped = float(b)
            break
        samples.append((float(b), neighbor_count_max(cs, dedup, U)))
    return GammaResult(name, samples, growth_verdict([s[1] for s in samples]),
                       {"stopped_at": stopped} if stopped is not None else {})


# ---------------------------------------------------------------------------
# near-identity overlaps


def _gaps(batch: AffineBatch, i, j, corners) -> np.ndarray:
    """``sup_x |phi_I^{-1} phi_J (x) - x|`` over box corners for index pairs."""
    if batch.orth is not None:
        out = np.empty(len(i))
        for k, (a, b) in enumerate(zip(i, j)):
            ra, rb = np.exp(batch.logs[a]), np.exp(batch.logs[b])
            oa, ob = batch.orth[a], batch.orth[b]
            y = ((corners @ ob.T) * rb + batch.offset[b] - batch.offset[a]) @ oa / ra
            out[k] = np.max(np.linalg.norm(y - corners, axis=1))
        return out
    dl = batch.logs[j] - batch.logs[i]
    dc = batch.offset[j] - batch.offset[i]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        shift = np.sign(dc) * np.exp(np.log(np.abs(dc)) - batch.logs[i])
    shift = np.where(dc == 0, 0.0, shift)
    lin = np.expm1(dl)
    y = lin[:, None, :] * corners[None, :, :] + shift[:, None, :]
    return np.max(np.linalg.norm(y, axis=2), axis=1)


@dataclass
class NearIdentitySample:
    b: float
    theta: float
    pairs: int
    qualifying: int
    min_gap: float | None


def near_identity_gap(sys: LayerSystem, b_grid, limit: int = DEFAULT_LIMIT, theta=None,
                      sigma=None, max_pairs: int = 1 << 24) -> list:
    """Gaps of intersecting distinct pairs in ``A_b``.

    ``theta`` is a number or one value per grid point (default ``0.01 |X|``).
    With ``sigma`` (one word per grid point, 1-based digits) only pairs
    ``(sigma, J)`` are examined, found by a pruned descent, so scales far
    beyond exhaustive enumeration stay cheap.
    """
    grid = [float(b) for b in b_grid]
    if theta is None:
        thetas = [0.01 * sys.ambient.diameter] * len(grid)
    elif np.ndim(theta) == 0:
        thetas = [float(theta)] * len(grid)
    else:
        thetas = [float(t) for t in theta]
    corners = sys.ambient.corners()
    out = []
    for idx, (b, th) in enumerate(zip(grid, thetas)):
        if sigma is None:
            cs = cutset(sys, b, limit)
            first, _ = cs._dedup
            first = np.sort(first)
            sub = AffineBatch(cs.affine.logs[first], cs.affine.offset[first],
                              None if cs.affine.orth is None else cs.affine.orth[first])
            lo, hi = sub.box_images(sys.ambient.lo, sys.ambient.hi)
            status, pi, pj = _backend.neighbor_pairs(lo, hi, _abs_tol(sys), max_pairs)
            if status != 0:
                raise CutsetLimitError(max_pairs, max_pairs, b)
            gaps = _gaps(sub, pi, pj, corners) if len(pi) else np.zeros(0)
            # gap is not symmetric in (I, J); take the better orientation
            if len(pi):
                gaps = np.minimum(gaps, _gaps(sub, pj, pi, corners))
        else:
            gaps = _focused_gaps(sys, b, sigma[idx], limit, corners)
        q = int(np.count_nonzero(gaps <= th))
        out.append(NearIdentitySample(b, th, int(len(gaps)), q, float(gaps.min()) if len(gaps) else None))
    return out


def _focused_gaps(sys: LayerSystem, b: float, word, limit: int, corners) -> np.ndarray:
    """Gaps between ``phi_sigma`` and every other map of ``A_b`` meeting it."""
    log_b = math.log(b)
    thr = log_b + scale_tol(log_b)
    depth = max(len(word), sys.depth_for_scale(thr))
    logd, sizes, offs, orth = layer_arrays(sys, depth)
    if orth is not None:
        raise UnsupportedGeometryError("focused near-identity search needs rotation-free systems")
    d = sys.dimension
    # sigma's composed form
    ls = np.zeros(d)
    oc = np.zeros(d)
    for lvl, j in enumerate(word):
        oc = oc + np.exp(ls) * offs[lvl, j - 1]
        ls = ls + logd[lvl, j - 1]
    if float(ls.max()) > thr or (len(word) > 1 and float((ls - logd[len(word) - 1, word[-1] - 1]).max()) <= thr):
        raise ValueError(f"word {word} is not in the cutset at b={b:g}")
    X = sys.ambient
    tlo = np.exp(ls) * X.lo + oc
    thi = np.exp(ls) * X.hi + oc
    tol = _abs_tol(sys)
    f_logs = np.zeros((1, d))
    f_off = np.zeros((1, d))
    found_logs, found_off = [], []
    for lvl in range(depth):
        n = int(sizes[lvl])
        nl = (f_logs[:, None, :] + logd[lvl, :n][None]).reshape(-1, d)
        no = (f_off[:, None, :] + np.exp(f_logs)[:, None, :] * offs[lvl, :n][None]).reshape(-1, d)
        sc = np.exp(nl)
        lo = sc * X.lo + no
        hi = sc * X.hi + no
        meet = np.all((lo <= thi + tol) & (tlo <= hi + tol), axis=1)
        nl, no = nl[meet], no[meet]
        done = nl.max(axis=1) <= thr
        found_logs.append(nl[done])
        found_off.append(no[done])
        f_logs, f_off = nl[~done], no[~done]
        if f_logs.shape[0] > limit:
            raise CutsetLimitError(int(f_logs.shape[0]), limit, b)
        if f_logs.shape[0] == 0:
            break
    logs = np.concatenate([ls[None]] + found_logs)
    off = np.concatenate([oc[None]] + found_off)
    batch = AffineBatch(logs, off)
    first, _ = batch.unique(X.diameter)
    first = np.sort(first)
    # drop maps equal to sigma's own
    keys = batch.dedup_keys(X.diameter)
    first = first[~np.all(keys[first] == keys[0], axis=1)]
    if first.size == 0:
        return np.zeros(0)
    zeros = np.zeros(first.size, dtype=np.int64)
    g1 = _gaps(batch, zeros, first, corners)
    g2 = _gaps(batch, first, zeros, corners)
    return np.minimum(g1, g2)


# ---------------------------------------------------------------------------
# report


@dataclass
class SeparationReport:
    results: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {}
        for k, v in sorted(self.results.items()):
            if hasattr(v, "to_json"):
                out[k] = v.to_json()
            elif isinstance(v, list):
                out[k] = [x.to_json() if hasattr(x, "to_json") else dict(vars(x)) for x in v]
            else:
                out[k] = v
        return out
