"""Maps, layers and layered systems.

A system is an infinite sequence of layers; layer ``n`` is a finite list of
contractions ``phi_{n,1..N_n}``. Points are pushed through words outer-first:
``phi_{1,J} = phi_{1,j1} o phi_{2,j2} o ...``.

All contraction factors are carried as logarithms so that products over
thousands of layers (or single factors like ``2**-2**n``) stay finite.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvariantError, ProviderRangeError

ORTHO_TOL = 1e-12
CONTAIN_TOL = 1e-12


class Kind(enum.Enum):
    SIMILARITY = "similarity"
    DIAGONAL = "diagonal"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def rotation2d(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def is_signed_permutation(m: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    a = np.abs(m)
    ones = np.abs(a - 1.0) <= tol
    zeros = a <= tol
    if not np.all(ones | zeros):
        return False
    return bool(np.all(ones.sum(axis=0) == 1) and np.all(ones.sum(axis=1) == 1))


@dataclass(frozen=True, eq=False)
class ContractionMap:
    """One contraction ``x -> r O (x + alpha)`` or ``x -> D (x + alpha)``.

    ``log_scale`` holds the per-axis log contraction (all entries equal for a
    similarity). Use :meth:`similarity` / :meth:`diagonal` to build one.
    """

    kind: Kind
    log_scale: np.ndarray
    orthogonal: np.ndarray
    translation: np.ndarray

    @classmethod
    def similarity(cls, ratio=None, translation=(0.0,), *, angle=None, orthogonal=None,
                   log_ratio=None) -> "ContractionMap":
        t = np.atleast_1d(np.asarray(translation, dtype=float))
        d = t.shape[0]
        if log_ratio is None:
            if ratio is None:
                raise ConfigError("/ratio", "ratio is required")
            ratio = float(ratio)
            if not (0.0 < ratio < 1.0):
                raise ConfigError("/ratio", f"ratio must lie in (0,1), got {ratio!r}")
            log_ratio = math.log(ratio)
        log_ratio = float(log_ratio)
        if not (math.isfinite(log_ratio) and log_ratio < 0.0):
            raise ConfigError("/ratio", f"log ratio must be finite and negative, got {log_ratio!r}")
        if orthogonal is not None and angle is not None:
            raise ConfigError("/orthogonal", "give either angle or orthogonal, not both")
        if angle is not None:
            if d != 2:
                raise ConfigError("/angle", "a rotation angle is only meaningful in 2D")
            o = rotation2d(float(angle))
        elif orthogonal is not None:
            o = np.asarray(orthogonal, dtype=float)
            if o.shape != (d, d):
                raise ConfigError("/orthogonal", f"expected a {d}x{d} matrix, got shape {o.shape}")
            if np.max(np.abs(o @ o.T - np.eye(d))) > ORTHO_TOL:
                raise ConfigError("/orthogonal", "matrix is not orthogonal within 1e-12")
        else:
            o = np.eye(d)
        return cls(Kind.SIMILARITY, _frozen(np.full(d, log_ratio)), _frozen(o), _frozen(t))

    @classmethod
    def diagonal(cls, diag=None, translation=None, *, log_diag=None) -> "ContractionMap":
        if log_diag is None:
            if diag is None:
                raise ConfigError("/diag", "diag is required")
            dg = np.atleast_1d(np.asarray(diag, dtype=float))
            if np.any(~((dg > 0.0) & (dg < 1.0))):
                raise ConfigError("/diag", f"every diag entry must lie in (0,1), got {dg.tolist()}")
            log_diag = np.log(dg)
        ld = np.atleast_1d(np.asarray(log_diag, dtype=float))
        if np.any(~np.isfinite(ld)) or np.any(ld >= 0.0):
            raise ConfigError("/diag", "log diag entries must be finite and negative")
        d = ld.shape[0]
        t = np.zeros(d) if translation is None else np.atleast_1d(np.asarray(translation, dtype=float))
        if t.shape != (d,):
            raise ConfigError("/translation", f"expected {d} components, got {t.shape[0]}")
        return cls(Kind.DIAGONAL, _frozen(ld), _frozen(np.eye(d)), _frozen(t))

    @property
    def dim(self) -> int:
        return self.translation.shape[0]

    @property
    def ratio(self) -> float:
        return float(math.exp(self.log_scale[0]))

    @property
    def diag(self) -> np.ndarray:
        return np.exp(self.log_scale)

    @property
    def log_max(self) -> float:
        return float(self.log_scale.max())

    @property
    def log_min(self) -> float:
        return float(self.log_scale.min())

    @property
    def has_rotation(self) -> bool:
        return not np.array_equal(self.orthogonal, np.eye(self.dim))

    @property
    def isotropic(self) -> bool:
        return bool(np.all(self.log_scale == self.log_scale[0]))

    @property
    def linear(self) -> np.ndarray:
        """The matrix part ``rO`` or ``D``."""
        if self.kind is Kind.SIMILARITY:
            return math.exp(self.log_scale[0]) * self.orthogonal
        return np.diag(np.exp(self.log_scale))

    @property
    def offset(self) -> np.ndarray:
        """Image of the origin, i.e. the affine offset ``A alpha``."""
        return self.linear @ self.translation

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"point has dimension {x.shape[-1]}, map expects {self.dim}")
        return (x + self.translation) @ self.linear.T

    def same_as(self, other: "ContractionMap") -> bool:
        return (self.kind is other.kind
                and np.array_equal(self.log_scale, other.log_scale)
                and np.array_equal(self.orthogonal, other.orthogonal)
                and np.array_equal(self.translation, other.translation))

    def __repr__(self) -> str:
        if self.kind is Kind.SIMILARITY:
            core = f"ratio={self.ratio:.6g}"
            if self.has_rotation:
                core += ", rotated"
        else:
            core = f"diag={np.round(self.diag, 6).tolist()}"
        return f"ContractionMap({self.kind.value}, {core}, translation={self.translation.tolist()})"


@dataclass(frozen=True)
class Box:
    """Closed (or, by context, open) axis-aligned box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __init__(self, lo, hi):
        lo = _frozen(np.atleast_1d(lo))
        hi = _frozen(np.atleast_1d(hi))
        if lo.shape != hi.shape:
            raise ValueError("lo/hi dimension mismatch")
        if np.any(hi < lo):
            raise ValueError(f"empty box {lo.tolist()}..{hi.tolist()}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def corners(self) -> np.ndarray:
        d = self.dim
        idx = (np.arange(2 ** d)[:, None] >> np.arange(d)[None, :]) & 1
        return np.where(idx == 1, self.hi, self.lo)

    def contains(self, other: "Box", tol: float = CONTAIN_TOL) -> bool:
        slack = tol * max(1.0, self.diameter)
        return bool(np.all(other.lo >= self.lo - slack) and np.all(other.hi <= self.hi + slack))

    def contains_points(self, pts, tol: float = CONTAIN_TOL) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        slack = tol * max(1.0, self.diameter)
        return np.all((pts >= self.lo - slack) & (pts <= self.hi + slack), axis=1)

    def hull_image(self, m: ContractionMap) -> "Box":
        """Bounding box of ``m(self)`` (exact when ``m`` keeps axes aligned)."""
        pts = m.apply(self.corners())
        return Box(pts.min(axis=0), pts.max(axis=0))

    def to_json(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Layer:
    index: int
    maps: tuple

    def __post_init__(self):
        if len(self.maps) < 2:
            raise InvariantError(f"layer {self.index} has {len(self.maps)} maps; at least 2 required")
        dims = {m.dim for m in self.maps}
        if len(dims) != 1:
            raise InvariantError(f"layer {self.index} mixes dimensions {sorted(dims)}")

    @property
    def size(self) -> int:
        return len(self.maps)

    @functools.cached_property
    def log_scales(self) -> np.ndarray:
        return np.stack([m.log_scale for m in self.maps])

    @functools.cached_property
    def translations(self) -> np.ndarray:
        return np.stack([m.translation for m in self.maps])

    @functools.cached_property
    def orthogonals(self) -> np.ndarray:
        return np.stack([m.orthogonal for m in self.maps])

    @property
    def log_c2(self) -> float:
        return float(self.log_scales.max())

    @property
    def log_c1(self) -> float:
        return float(self.log_scales.min())

    @property
    def c2(self) -> float:
        return math.exp(self.log_c2)

    @property
    def c1(self) -> float:
        return math.exp(self.log_c1)

    @property
    def all_similarity(self) -> bool:
        return all(m.kind is Kind.SIMILARITY for m in self.maps)

    @property
    def has_rotation(self) -> bool:
        return any(m.has_rotation for m in self.maps)

    @property
    def anisotropic(self) -> bool:
        return not all(m.isotropic for m in self.maps)

    def same_as(self, other: "Layer") -> bool:
        return len(self.maps) == len(other.maps) and all(
            a.same_as(b) for a, b in zip(self.maps, other.maps))


@dataclass(frozen=True)
class RatioTable:
    """Per-layer multisets of similarity log-ratios, flattened.

    Layer ``i`` (0-based within the table) owns entries
    ``offsets[i]:offsets[i+1]``; each entry is a distinct log-ratio with the
    log of its multiplicity.
    """

    logr: np.ndarray
    logm: np.ndarray
    offsets: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.offsets) - 1

    def layer_log_count(self) -> np.ndarray:
        return np.logaddexp.reduceat(self.logm, self.offsets[:-1])

    def layer_max(self) -> np.ndarray:
        return np.maximum.reduceat(self.logr, self.offsets[:-1])

    def layer_min(self) -> np.ndarray:
        return np.minimum.reduceat(self.logr, self.offsets[:-1])

    def uniform_layers(self) -> np.ndarray:
        """True where every map of the layer has the same ratio."""
        return np.diff(self.offsets) == 1

    @classmethod
    def from_groups(cls, groups: Sequence[tuple]) -> "RatioTable":
        sizes = [len(g[0]) for g in groups]
        offsets = np.zeros(len(groups) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(sizes)
        logr = np.concatenate([np.asarray(g[0], float) for g in groups]) if groups else np.zeros(0)
        logm = np.concatenate([np.asarray(g[1], float) for g in groups]) if groups else np.zeros(0)
        return cls(logr, logm, offsets)


def group_ratios(layer: Layer) -> tuple:
    """Distinct log-ratios of a similarity layer with log multiplicities."""
    vals = layer.log_scales[:, 0]
    u, counts = np.unique(vals, return_counts=True)
    return u, np.log(counts.astype(float))


class Provider:
    """Source of layers. Subclasses: :class:`ExplicitPeriodic` and families."""

    name = "provider"
    max_layer: int | None = None
    similarity_only = False

    def maps(self, n: int) -> list:
        raise NotImplementedError

    def ratio_groups(self, n: int):
        """Optional closed form for the ratio multiset of layer ``n``."""
        return None

    def ratio_table(self, start: int, stop: int) -> RatioTable | None:
        """Optional vectorized table for layers ``start..stop-1``."""
        return None

    def open_set(self, n: int) -> Box | None:
        return None

    def structure_points(self, kmax: int) -> list:
        """Layer indices where the provider's ratio pattern changes regime."""
        return []

    def to_json(self) -> dict:
        raise NotImplementedError


class ExplicitPeriodic(Provider):
    """Layers ``prefix[0..p-1]`` then ``cycle`` repeated forever."""

    name = "explicit"

    def __init__(self, prefix: Sequence[Sequence[ContractionMap]], cycle: Sequence[Sequence[ContractionMap]]):
        if not cycle:
            raise ConfigError("/cycle", "cycle must contain at least one layer")
        self.prefix = tuple(tuple(l) for l in prefix)
        self.cycle = tuple(tuple(l) for l in cycle)
        self.similarity_only = all(m.kind is Kind.SIMILARITY for l in self.prefix + self.cycle for m in l)

    def _source(self, n: int) -> tuple:
        p = len(self.prefix)
        if n <= p:
            return self.prefix[n - 1]
        return self.cycle[(n - p - 1) % len(self.cycle)]

    def maps(self, n: int) -> list:
        return list(self._source(n))

    def structure_points(self, kmax: int) -> list:
        p, c = len(self.prefix), len(self.cycle)
        return [k for k in range(p, kmax + 1, c) if k >= 1]

    def to_json(self) -> dict:
        from .config import map_to_json
        return {
            "provider": "explicit",
            "layers": [[map_to_json(m) for m in l] for l in self.prefix],
            "cycle": [[map_to_json(m) for m in l] for l in self.cycle],
        }


class LayerSystem:
    """A Moran-type system: ambient box plus a layer provider.

    ``offset`` shifts the layer index, so ``shift(k).layer(n)`` is the
    original layer ``n + k`` (the tail system starting at layer ``k+1``).
    Materialized layers are cached; the cache never changes observable values.
    """

    def __init__(self, dimension: int, ambient: Box, provider: Provider, offset: int = 0,
                 weights: "WeightSequence | None" = None):
        if dimension not in (1, 2, 3):
            raise ConfigError("/dimension", f"dimension must be 1, 2 or 3, got {dimension!r}")
        if ambient.dim != dimension:
            raise ConfigError("/ambient", f"ambient box has dimension {ambient.dim}, expected {dimension}")
        self.dimension = dimension
        self.ambient = ambient
        self.provider = provider
        self.offset = offset
        self.weights = weights if weights is not None else WeightSequence.uniform()
        self._cache: dict[int, Layer] = {}

    def __repr__(self) -> str:
        extra = f", offset={self.offset}" if self.offset else ""
        return f"LayerSystem({self.provider.name}, d={self.dimension}{extra})"

    @property
    def max_layer(self) -> int | None:
        m = self.provider.max_layer
        return None if m is None else m - self.offset

    def _check_index(self, n: int) -> int:
        if n < 1:
            raise ValueError(f"layer index must be >= 1, got {n}")
        if self.max_layer is not None and n > self.max_layer:
            raise ProviderRangeError(
                f"layer {n} is beyond what provider '{self.provider.name}' can represent "
                f"(max {self.max_layer})")
        return n + self.offset

    def layer(self, n: int) -> Layer:
        n = int(n)
        got = self._cache.get(n)
        if got is not None:
            return got
        absn = self._check_index(n)
        maps = self.provider.maps(absn)
        lay = Layer(n, tuple(maps))
        if lay.maps[0].dim != self.dimension:
            raise InvariantError(f"layer {n} maps have dimension {lay.maps[0].dim}, system has {self.dimension}")
        for j, m in enumerate(lay.maps, start=1):
            img = self.ambient.hull_image(m)
            if not self.ambient.contains(img):
                raise InvariantError(
                    f"layer {n} map {j} sends the ambient box outside itself "
                    f"(image {img.lo.tolist()}..{img.hi.tolist()})")
        if len(self._cache) < 4096:
            self._cache[n] = lay
        return lay

    def shift(self, k: int) -> "LayerSystem":
        """The tail system ``{Phi_n}_{n > k}`` re-indexed from 1."""
        if k < 0:
            raise ValueError("shift must be non-negative")
        return LayerSystem(self.dimension, self.ambient, self.provider, self.offset + k, self.weights)

    def with_weights(self, weights: "WeightSequence") -> "LayerSystem":
        return LayerSystem(self.dimension, self.ambient, self.provider, self.offset, weights)

    def with_ambient(self, ambient: Box) -> "LayerSystem":
        return LayerSystem(self.dimension, ambient, self.provider, self.offset, self.weights)

    def is_similarity(self, depth: int = 64) -> bool:
        if self.provider.similarity_only:
            return True
        top = depth if self.max_layer is None else min(depth, self.max_layer)
        return all(self.layer(n).all_similarity for n in range(1, top + 1))

    def ratio_table(self, k: int) -> RatioTable:
        """Ratio multisets for layers ``1..k`` (similarity layers only)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        self._check_index(k)
        start = 1 + self.offset
        tab = self.provider.ratio_table(start, start + k)
        if tab is not None:
            return tab
        groups = []
        for n in range(1, k + 1):
            g = self.provider.ratio_groups(n + self.offset)
            if g is None:
                lay = self.layer(n)
                if not lay.all_similarity:
                    raise InvariantError(f"layer {n} contains non-similarity maps")
                g = group_ratios(lay)
            groups.append(g)
        return RatioTable.from_groups(groups)

    def log_c2_prefix(self, k: int) -> np.ndarray:
        """Per-layer ``log c_{2,n}`` for ``n = 1..k``."""
        if self.provider.similarity_only:
            return self.ratio_table(k).layer_max()
        return np.array([self.layer(n).log_c2 for n in range(1, k + 1)])

    def log_c1_prefix(self, k: int) -> np.ndarray:
        if self.provider.similarity_only:
            return self.ratio_table(k).layer_min()
        return np.array([self.layer(n).log_c1 for n in range(1, k + 1)])

    def depth_for_scale(self, log_eps: float, cap: int = 1_000_000) -> int:
        """Smallest ``m`` with ``sum_{i<=m} log c_{2,i} <= log_eps``."""
        total = 0.0
        n = 0
        chunk = 64
        while True:
            top = n + chunk
            if self.max_layer is not None:
                top = min(top, self.max_layer)
            if top <= n:
                raise ProviderRangeError(f"scale exp({log_eps:.4g}) not reached within provider range")
            vals = self.log_c2_prefix(top)[n:]
            cum = total + np.cumsum(vals)
            hit = np.nonzero(cum <= log_eps + 1e-12 * max(1.0, abs(log_eps)))[0]
            if hit.size:
                return n + int(hit[0]) + 1
            total = float(cum[-1])
            n = top
            if n >= cap:
                raise ProviderRangeError(f"scale exp({log_eps:.4g}) not reached within {cap} layers")
            chunk = min(chunk * 2, 65536)

    def contraction_rate(self, depth: int = 1024) -> float:
        """Observed ``eps_c = -(1/n) sum_{i<=n} log c_{2,i}`` at ``n = depth``."""
        if self.max_layer is not None:
            depth = min(depth, self.max_layer)
        return float(-np.sum(self.log_c2_prefix(depth)) / depth)

    def to_json(self) -> dict:
        out = {
            "dimension": self.dimension,
            "ambient": self.ambient.to_json(),
        }
        out.update(self.provider.to_json())
        if self.offset:
            out["offset"] = self.offset
        if not self.weights.is_uniform:
            out["weights"] = self.weights.to_json()
        return out


@dataclass(frozen=True)
class WeightSequence:
    """Probability vectors per layer.

    kinds: ``uniform``; ``ratio_power`` (``p_j ∝ r_j**s``); ``explicit``
    (prefix + periodic cycle of vectors, each matching the layer size).
    """

    kind: str
    s: float = 0.0
    prefix: tuple = ()
    cycle: tuple = ()

    @classmethod
    def uniform(cls) -> "WeightSequence":
        return cls("uniform")

    @classmethod
    def ratio_power(cls, s: float) -> "WeightSequence":
        return cls("ratio_power", s=float(s))

    @classmethod
    def explicit(cls, prefix, cycle) -> "WeightSequence":
        def norm(vecs, where):
            out = []
            for i, v in enumerate(vecs):
                v = np.asarray(v, dtype=float)
                if np.any(v <= 0):
                    raise ConfigError(f"/weights/{where}/{i}", "weights must be positive")
                if abs(v.sum() - 1.0) > 1e-12:
                    raise ConfigError(f"/weights/{where}/{i}", f"weights sum to {v.sum()!r}, not 1")
                out.append(tuple(v.tolist()))
            return tuple(out)
        if not cycle:
            raise ConfigError("/weights/cycle", "cycle must be nonempty")
        return cls("explicit", prefix=norm(prefix, "prefix"), cycle=norm(cycle, "cycle"))

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def log_probs(self, layer: Layer, absolute_index: int | None = None) -> np.ndarray:
        n = layer.size
        if self.kind == "uniform":
            return np.full(n, -math.log(n))
        if self.kind == "ratio_power":
            lr = self.s * layer.log_scales.max(axis=1)
            return lr - np.logaddexp.reduce(lr)
        idx = layer.index if absolute_index is None else absolute_index
        p = len(self.prefix)
        vec = self.prefix[idx - 1] if idx <= p else self.cycle[(idx - p - 1) % len(self.cycle)]
        if len(vec) != n:
            raise ConfigError("/weights", f"layer {idx} has {n} maps but {len(vec)} weights")
        return np.log(np.asarray(vec))

    def to_json(self) -> dict:
        if self.kind == "ratio_power":
            return {"kind": "ratio_power", "s": self.s}
        if self.kind == "explicit":
            return {"kind": "explicit", "prefix": [list(v) for v in self.prefix],
                    "cycle": [list(v) for v in self.cycle]}
        return {"kind": "uniform"}


def apply(m: ContractionMap, x) -> np.ndarray:
    """Evaluate ``m`` at ``x`` (single point or array of points)."""
    return m.apply(x)


def layer(sys: LayerSystem, n: int) -> Layer:
    return sys.layer(n)
