"""Moran-equation dimensions, box-dimension estimates and the H^s trichotomy.

Everything here works on log-ratios. ``F_k(s) = sum_{i<=k} log sum_j r_{ij}**s``
is strictly decreasing and convex in ``s``; its root ``s_k`` drives the
Hausdorff dimension estimate ``liminf s_k``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .attractor import PointCloud
from .core import LayerSystem, RatioTable
from .errors import CutsetLimitError, GuardError, ProviderRangeError
from .words import DEFAULT_LIMIT, cutset, log_cutset_count

RESIDUAL_TOL = 1e-10
DEFAULT_KMAX = 4096
DENSE_K = 256

# measure_class thresholds: slope per unit ln n of the envelopes, bounded band
TAU = 1e-3
BAND = math.log(1e6)

ZERO = "Zero"
POSITIVE_FINITE = "PositiveFinite"
INFINITE = "Infinite"
INCONCLUSIVE = "Inconclusive"


# ---------------------------------------------------------------------------
# s_k


def _kernels():
    return _backend.kernels


def moran_F(tab: RatioTable, k: int, s: float) -> tuple:
    """``(F_k(s), F_k'(s))``."""
    return _kernels().moran_eval(tab.logr, tab.logm, tab.offsets, int(k), float(s))


def _solve(tab: RatioTable, k: int) -> float:
    off = tab.offsets
    lr, lm = tab.logr[:off[k]], tab.logm[:off[k]]
    starts = off[:k]
    logN = float(np.sum(np.logaddexp.reduceat(lm, starts)))
    smax = float(np.sum(np.maximum.reduceat(lr, starts)))
    smin = float(np.sum(np.minimum.reduceat(lr, starts)))
    lo, hi = logN / -smin, logN / -smax
    if hi - lo <= 1e-15 * max(1.0, hi):
        return 0.5 * (lo + hi)
    # safeguarded Newton inside [lo, hi] with F(lo) >= 0 >= F(hi)
    s = lo
    for _ in range(200):
        F, dF = moran_F(tab, k, s)
        if abs(F) <= RESIDUAL_TOL * 1e-2:
            return s
        if F > 0:
            lo = s
        else:
            hi = s
        step = s - F / dF if dF < 0 else None
        s = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * max(1.0, hi):
            break
    return s


def solve_sk(sys: LayerSystem, k: int, table: RatioTable | None = None) -> float:
    """Root of the layer-``k`` Moran equation ``prod_{i<=k} sum_j r_ij**s = 1``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tab = table if table is not None else sys.ratio_table(k)
    if tab.depth < k:
        raise ValueError(f"ratio table has {tab.depth} layers, need {k}")
    if np.all(tab.uniform_layers()[:k]):
        return float(np.sum(tab.logm[:k]) / -np.sum(tab.logr[:k]))
    s = _solve(tab, k)
    F, _ = moran_F(tab, k, s)
    if abs(F) > RESIDUAL_TOL:
        raise GuardError("moran_residual", f"|F_{k}(s)| = {abs(F):.3g} exceeds {RESIDUAL_TOL}")
    return s


def default_ks(kmax: int, structure=(), geometric: int = 256) -> np.ndarray:
    ks = set(range(1, min(DENSE_K, kmax) + 1))
    if kmax > DENSE_K:
        ks.update(np.unique(np.round(np.geomspace(DENSE_K, kmax, geometric)).astype(int)).tolist())
    ks.update(int(k) for k in structure if 1 <= k <= kmax)
    ks.add(kmax)
    return np.array(sorted(ks), dtype=np.int64)


def s_sequence(sys: LayerSystem, ks, table: RatioTable | None = None) -> np.ndarray:
    ks = np.asarray(ks, dtype=np.int64)
    kmax = int(ks.max())
    tab = table if table is not None else sys.ratio_table(kmax)
    if np.all(tab.uniform_layers()[:kmax]):
        num = np.cumsum(tab.logm[:kmax])
        den = -np.cumsum(tab.logr[:kmax])
        return num[ks - 1] / den[ks - 1]
    return np.array([_solve_checked(tab, int(k)) for k in ks])


def _solve_checked(tab, k):
    s = _solve(tab, k)
    F, _ = moran_F(tab, k, s)
    if abs(F) > RESIDUAL_TOL:
        raise GuardError("moran_residual", f"|F_{k}(s)| = {abs(F):.3g} exceeds {RESIDUAL_TOL}")
    return s


def _cap_depth(sys: LayerSystem, k: int) -> int:
    m = sys.max_layer
    return k if m is None else min(k, m)


def _trend(x, y) -> float:
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class HausdorffEstimate:
    ks: np.ndarray
    s: np.ndarray
    estimate: float
    window: tuple
    trend: float
    structure_min: float | None

    def to_json(self) -> dict:
        return {
            "s_seq": [[int(k), float(v)] for k, v in zip(self.ks, self.s)],
            "dimH_est": self.estimate,
            "window": list(self.window),
            "trend_per_log_k": self.trend,
            "structure_min": self.structure_min,
        }


def hausdorff_dim(sys: LayerSystem, kmax: int = DEFAULT_KMAX, ks=None) -> HausdorffEstimate:
    """``s_k`` over ``1..kmax`` (geometrically thinned past 256) and ``liminf`` estimate.

    The estimate is the minimum over ``k >= kmax/2``. Layer indices where the
    provider's pattern changes regime are always sampled; the window is
    widened to contain the last two of them, and their minimum inside the
    window is reported separately.
    """
    kmax = _cap_depth(sys, kmax)
    structure = sys.provider.structure_points(kmax + sys.offset)
    structure = [k - sys.offset for k in structure if k - sys.offset >= 1]
    if ks is None:
        ks = default_ks(kmax, structure)
    ks = np.asarray(ks, dtype=np.int64)
    tab = sys.ratio_table(int(ks.max()))
    s = s_sequence(sys, ks, tab)
    cut = max(1, int(ks.max()) // 2)
    inside = [k for k in structure if k <= ks.max()]
    if len(inside) >= 2:
        # keep at least one full regime period in the window
        cut = min(cut, inside[-2])
    win = ks >= cut
    est = float(s[win].min())
    trend = _trend(np.log(ks[win].astype(float)), s[win])
    smask = np.isin(ks, structure) & win
    smin = float(s[smask].min()) if np.any(smask) else None
    return HausdorffEstimate(ks, s, est, (int(cut), int(ks.max())), trend, smin)


# ---------------------------------------------------------------------------
# box dimension from #A_b


@dataclass
class BoxSample:
    b: float
    log_count: float
    value: float
    method: str  # "enumerated" (#A_b after dedup) or "counted" (#I_b, no dedup)


@dataclass
class BoxEstimate:
    lower: float | None
    upper: float | None
    samples: list
    complete: bool
    stopped_at: float | None = None

    def to_json(self) -> dict:
        return {
            "box_lower_est": self.lower,
            "box_upper_est": self.upper,
            "complete": self.complete,
            "stopped_at": self.stopped_at,
            "samples": [asdict(s) for s in self.samples],
        }


def natural_grid(sys: LayerSystem, m: int = 64, start: int = 1) -> np.ndarray:
    """``b_n = prod_{i<=n} c_{2,i}`` for ``n = start..m``."""
    m = _cap_depth(sys, m)
    cum = np.cumsum(sys.log_c2_prefix(m))
    return np.exp(cum[start - 1:])


def grid_at_layers(sys: LayerSystem, ns) -> np.ndarray:
    """Log of ``b_n = prod_{i<=n} c_{2,i}`` at the given layers (may underflow as a float)."""
    ns = np.asarray(ns, dtype=np.int64)
    cum = np.cumsum(sys.log_c2_prefix(int(ns.max())))
    return cum[ns - 1]


def box_dim_formula(sys: LayerSystem, b_grid=None, limit: int = DEFAULT_LIMIT,
                    enumerate_max: int = 200_000, log_b_grid=None) -> BoxEstimate:
    """``ln #A_b / (-ln b)`` over a decreasing grid; inf/sup over its last half.

    Scales whose cutset has at most ``enumerate_max`` words are enumerated and
    deduplicated; beyond that (similarity systems only) ``#I_b`` is counted
    without enumeration, which equals ``#A_b`` when distinct words give
    distinct maps. ``log_b_grid`` accepts scales too small for a float.
    """
    if log_b_grid is None:
        if b_grid is None:
            b_grid = natural_grid(sys)
        log_b_grid = np.log(np.asarray(b_grid, dtype=float))
    log_b_grid = np.asarray(log_b_grid, dtype=float)
    if np.any(log_b_grid >= 0) or np.any(np.diff(log_b_grid) >= 0):
        raise ValueError("b grid must be strictly decreasing inside (0,1)")
    similarity = sys.is_similarity()
    samples = []
    stopped = None
    for lb in log_b_grid:
        b = math.exp(lb)
        try:
            lc, method = _log_count(sys, lb, b, limit, enumerate_max, similarity)
        except (CutsetLimitError, ProviderRangeError):
            stopped = b
            break
        samples.append(BoxSample(b, lc, lc / -lb, method))
    vals = np.array([s.value for s in samples])
    if vals.size == 0:
        return BoxEstimate(None, None, samples, False, stopped)
    tail = vals[len(vals) // 2:]
    return BoxEstimate(float(tail.min()), float(tail.max()), samples, stopped is None, stopped)


def _log_count(sys, lb, b, limit, enumerate_max, similarity):
    if similarity:
        lc = log_cutset_count(sys, log_b=lb)
        if lc <= math.log(enumerate_max):
            cs = cutset(sys, b, limit)
            return math.log(cs.count_maps), "enumerated"
        return lc, "counted"
    cs = cutset(sys, b, limit)
    return math.log(cs.count_maps), "enumerated"


# ---------------------------------------------------------------------------
# empirical box counting


@dataclass
class BoxCount:
    counts: list  # (delta, N or None)
    refused: list  # (delta, reason)
    slope: float | None

    def to_json(self) -> dict:
        return {"counts": [[d, n] for d, n in self.counts],
                "refused": [[d, r] for d, r in self.refused], "slope": self.slope}


def box_count_empirical(cloud: PointCloud, deltas) -> BoxCount:
    """Occupied cells of the origin-anchored grid of side ``delta``; LSQ slope."""
    counts, refused = [], []
    pts = np.asarray(cloud.points, dtype=float)
    for delta in deltas:
        delta = float(delta)
        if delta < 2.0 * cloud.scale:
            refused.append((delta, f"delta below twice the cloud scale {cloud.scale:.3g}"))
            continue
        cells = np.floor(pts / delta).astype(np.int64)
        counts.append((delta, int(np.unique(cells, axis=0).shape[0])))
    slope = None
    if len(counts) >= 2:
        x = -np.log([c[0] for c in counts])
        y = np.log([c[1] for c in counts])
        slope = _trend(x, y)
    return BoxCount(counts, refused, slope)


# ---------------------------------------------------------------------------
# measure class


@dataclass
class MeasureClass:
    verdict: str
    s: float
    log_pi: np.ndarray
    lower_env: list  # (n, windowed min of log Pi)
    upper_env: list
    slope_lower: float
    slope_upper: float
    uniform_s_set: bool

    def to_json(self, witness_points: int = 64) -> dict:
        n = self.log_pi.shape[0]
        idx = np.unique(np.round(np.geomspace(1, n, min(witness_points, n))).astype(int))
        return {
            "measure_class": self.verdict,
            "s": self.s,
            "witness": [[int(i), float(self.log_pi[i - 1])] for i in idx],
            "lower_envelope": [[int(a), float(b)] for a, b in self.lower_env],
            "upper_envelope": [[int(a), float(b)] for a, b in self.upper_env],
            "slope_lower": self.slope_lower,
            "slope_upper": self.slope_upper,
            "uniform_s_set": self.uniform_s_set,
        }


def log_pi(sys: LayerSystem, s: float, nmax: int) -> np.ndarray:
    """``log Pi_n = sum_{i<=n} log sum_j r_ij**s`` for ``n = 1..nmax``."""
    tab = sys.ratio_table(nmax)
    per = _kernels().moran_layers(tab.logr, tab.logm, tab.offsets, float(s))
    return np.cumsum(per)


def _envelope(lp: np.ndarray, fn) -> list:
    out = []
    m = 1
    while (1 << m) <= lp.shape[0]:
        a, b = 1 << (m - 1), 1 << m
        out.append((b, float(fn(lp[a - 1:b]))))
        m += 1
    return out


def _classify(env, tau, band):
    if len(env) < 4:
        return INCONCLUSIVE, 0.0
    tail = env[len(env) // 2:]
    x = np.log([e[0] for e in tail])
    y = np.array([e[1] for e in tail])
    slope = _trend(x, y)
    steps = np.diff(y)
    if slope < -tau and np.all(steps < 0):
        return ZERO, slope
    if slope > tau and np.all(steps > 0):
        return INFINITE, slope
    if abs(slope) <= tau and np.ptp(y) < band:
        return POSITIVE_FINITE, slope
    return INCONCLUSIVE, slope


def measure_class(sys: LayerSystem, s: float, nmax: int = 1 << 16, tau: float = TAU,
                  band: float = BAND) -> MeasureClass:
    """Classify ``liminf Pi_n`` as 0, positive finite or infinite.

    ``Pi_n`` is enveloped by its min and max over dyadic windows
    ``[2**(m-1), 2**m]``. Over the trailing half of the windows the lower
    envelope's slope against ``ln n`` decides: strictly decreasing with slope
    below ``-tau`` gives Zero, strictly increasing above ``tau`` gives
    Infinite, a flat envelope whose range stays inside ``band`` gives
    PositiveFinite. ``uniform_s_set`` is set when both envelopes are flat.
    """
    nmax = _cap_depth(sys, nmax)
    lp = log_pi(sys, s, nmax)
    lower = _envelope(lp, np.min)
    upper = _envelope(lp, np.max)
    verdict, sl = _classify(lower, tau, band)
    vu, su = _classify(upper, tau, band)
    return MeasureClass(verdict, float(s), lp, lower, upper, sl, su,
                        verdict == POSITIVE_FINITE and vu == POSITIVE_FINITE)


# ---------------------------------------------------------------------------
# diagnostics and report


def diagnostics(sys: LayerSystem, depth: int = 1024) -> dict:
    """Finite-depth checks of the hypotheses behind the dimension formulas."""
    depth = _cap_depth(sys, depth)
    lc1 = sys.log_c1_prefix(depth)
    lc2 = sys.log_c2_prefix(depth)
    half = depth // 2
    first, second = float(lc1[:max(half, 1)].min()), float(lc1[half:].min())
    # r0 = inf of all ratios; flag decay when the tail minimum keeps dropping
    r0_positive = second >= first - math.log(1.5)
    equal = False
    if sys.is_similarity():
        equal = bool(np.all(sys.ratio_table(depth).uniform_layers()))
    cum = np.cumsum(lc2)
    q = np.abs(lc2[1:] / cum[:-1])
    q_tail = float(q[half:].max()) if q.size > half else float(q.max()) if q.size else 0.0
    eps_c = float(-cum[-1] / depth)
    return {
        "depth": depth,
        "r0_observed": math.exp(float(lc1.min())),
        "r0_positive": bool(r0_positive),
        "equal_ratio_per_layer": equal,
        "contra_ra_max_tail": q_tail,
        "contra_ra_holds": bool(q_tail < 0.05),
        "contraction_rate": eps_c,
        "contraction_ok": eps_c > 0,
        "observed_up_to": depth,
    }


@dataclass
class DimensionReport:
    hausdorff: HausdorffEstimate | None = None
    box: BoxEstimate | None = None
    measure: MeasureClass | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def dimH_est(self):
        return None if self.hausdorff is None else self.hausdorff.estimate

    def to_json(self) -> dict:
        out = {"diagnostics": self.diagnostics}
        if self.hausdorff is not None:
            out.update(self.hausdorff.to_json())
        if self.box is not None:
            out.update(self.box.to_json())
        if self.measure is not None:
            out.update(self.measure.to_json())
        return out


def dimension_report(sys: LayerSystem, kmax: int = DEFAULT_KMAX, b_grid=None, s: float | None = None,
                     nmax: int = 1 << 16, limit: int = DEFAULT_LIMIT, box: bool = True) -> DimensionReport:
    rep = DimensionReport(diagnostics=diagnostics(sys))
    rep.hausdorff = hausdorff_dim(sys, kmax)
    if box:
        rep.box = box_dim_formula(sys, b_grid, limit)
    s = rep.hausdorff.estimate if s is None else s
    rep.measure = measure_class(sys, s, nmax)
    return rep
