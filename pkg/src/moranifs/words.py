"""Words, composed maps and scale cutsets.

Digits on :class:`Word` are 1-based (``1..N_n``); internally arrays are
0-based. A word ``J`` starting at layer ``n`` denotes
``phi_{n,J} = phi_{n,j_n} o phi_{n+1,j_{n+1}} o ...``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _backend
from .core import ContractionMap, Kind, LayerSystem, WeightSequence
from .errors import CutsetLimitError, ProviderRangeError, UnsupportedCompositionError, UnsupportedGeometryError

DEDUP_RTOL = 1e-12
DEFAULT_LIMIT = 2_000_000


def scale_tol(log_b: float) -> float:
    """Slack used when comparing ``log R_J`` against ``log b``."""
    return 1e-12 * max(1.0, abs(log_b))


@dataclass(frozen=True)
class Word:
    start: int
    digits: tuple
    logR: float
    logr: float

    def __len__(self):
        return len(self.digits)

    def __str__(self):
        if not self.digits:
            return "ϑ"
        sep = "" if max(self.digits) < 10 else "."
        return sep.join(str(j) for j in self.digits)


def word_log_scales(sys: LayerSystem, digits: Sequence[int], start: int = 1) -> np.ndarray:
    """Per-axis log contraction of the composed linear part."""
    total = np.zeros(sys.dimension)
    for i, j in enumerate(digits):
        lay = sys.layer(start + i)
        if not 1 <= j <= lay.size:
            raise ValueError(f"digit {j} invalid for layer {start + i} with {lay.size} maps")
        total = total + lay.log_scales[j - 1]
    return total


def make_word(sys: LayerSystem, digits: Sequence[int], start: int = 1) -> Word:
    digits = tuple(int(j) for j in digits)
    ls = word_log_scales(sys, digits, start)
    return Word(start, digits, float(ls.max()) if digits else 0.0, float(ls.min()) if digits else 0.0)


def compose(sys: LayerSystem, J: Word | Sequence[int]) -> ContractionMap:
    """The composed map ``phi_{n,J}`` as a single :class:`ContractionMap`."""
    if not isinstance(J, Word):
        J = make_word(sys, J)
    d = sys.dimension
    maps = [sys.layer(J.start + i).maps[j - 1] for i, j in enumerate(J.digits)]
    if not maps:
        return IdentityMap(d)
    diag_kind = any(m.kind is Kind.DIAGONAL and not m.isotropic for m in maps)
    if diag_kind and any(m.has_rotation for m in maps):
        raise UnsupportedCompositionError(
            "composing a rotation with an anisotropic diagonal map leaves the diagonal class")
    logs = np.zeros(d)
    orth = np.eye(d)
    offset = np.zeros(d)
    for m in maps:
        offset = offset + np.exp(logs) * (orth @ m.offset)
        logs = logs + m.log_scale
        orth = orth @ m.orthogonal
    lin_inv = np.exp(-logs)
    if diag_kind:
        return ContractionMap.diagonal(log_diag=logs, translation=lin_inv * offset)
    # similarity: x -> r O (x + alpha), offset = r O alpha
    alpha = lin_inv * (orth.T @ offset)
    return ContractionMap.similarity(log_ratio=float(logs[0]), translation=alpha, orthogonal=orth)


class IdentityMap:
    """The empty composition; quacks like a :class:`ContractionMap`."""

    kind = Kind.SIMILARITY

    def __init__(self, d: int):
        self.log_scale = np.zeros(d)
        self.orthogonal = np.eye(d)
        self.translation = np.zeros(d)

    @property
    def dim(self):
        return self.translation.shape[0]

    ratio = 1.0
    offset = property(lambda self: np.zeros(self.dim))
    linear = property(lambda self: np.eye(self.dim))

    def apply(self, x):
        return np.asarray(x, dtype=float).copy()

    def __repr__(self):
        return f"IdentityMap(d={self.dim})"


# ---------------------------------------------------------------------------
# batched composed affine forms  x -> diag(exp(logs)) O x + offset


@dataclass
class AffineBatch:
    logs: np.ndarray  # (W, d)
    offset: np.ndarray  # (W, d)
    orth: np.ndarray | None = None  # (W, d, d) when any rotation occurs

    def __len__(self):
        return self.logs.shape[0]

    def apply(self, x) -> np.ndarray:
        """Image of the single point ``x`` under every map."""
        x = np.asarray(x, dtype=float)
        if self.orth is None:
            return np.exp(self.logs) * x + self.offset
        return np.exp(self.logs) * np.einsum("wab,b->wa", self.orth, x) + self.offset

    def box_images(self, lo, hi) -> tuple:
        """Exact images of the box ``[lo, hi]`` (axis-preserving maps only)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.orth is not None:
            ok = np.all((np.abs(self.orth) <= 1e-12) | (np.abs(np.abs(self.orth) - 1) <= 1e-12), axis=(1, 2))
            if not np.all(ok):
                raise UnsupportedGeometryError("rotated image of a box is not an axis-aligned box")
            p = np.round(self.orth)
            a = np.einsum("wab,b->wa", p, lo)
            b = np.einsum("wab,b->wa", p, hi)
        else:
            a, b = lo, hi
        sc = np.exp(self.logs)
        y1 = sc * a + self.offset
        y2 = sc * b + self.offset
        return np.minimum(y1, y2), np.maximum(y1, y2)

    def dedup_keys(self, length_scale: float) -> np.ndarray:
        """Integer keys equal for maps whose parameters agree within ``DEDUP_RTOL``."""
        ql = DEDUP_RTOL * max(1.0, float(np.max(np.abs(self.logs))) if self.logs.size else 1.0)
        qo = DEDUP_RTOL * max(length_scale, 1e-300)
        cols = [np.round(self.logs / ql), np.round(self.offset / qo)]
        if self.orth is not None:
            cols.append(np.round(self.orth.reshape(len(self), -1) / DEDUP_RTOL))
        return np.concatenate(cols, axis=1)

    def unique(self, length_scale: float) -> tuple:
        """``(first_index_per_class, label_per_map)``."""
        if len(self) == 0:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        keys = self.dedup_keys(length_scale)
        _, first, labels = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        return first, labels.reshape(-1)

    def to_maps(self, idx) -> list:
        out = []
        for i in np.atleast_1d(idx):
            logs = self.logs[i]
            o = np.eye(logs.shape[0]) if self.orth is None else self.orth[i]
            if np.all(logs == logs[0]):
                alpha = np.exp(-logs) * (o.T @ self.offset[i])
                out.append(ContractionMap.similarity(log_ratio=float(logs[0]), translation=alpha, orthogonal=o))
            else:
                out.append(ContractionMap.diagonal(log_diag=logs, translation=np.exp(-logs) * self.offset[i]))
        return out


def layer_arrays(sys: LayerSystem, depth: int, start: int = 1) -> tuple:
    """Padded per-layer tables for layers ``start..start+depth-1``.

    Returns ``(logd (depth, Nmax, d), sizes, offsets (depth, Nmax, d), orth or None)``;
    ``offsets`` hold each map's image of the origin.
    """
    lays = [sys.layer(start + i) for i in range(depth)]
    d = sys.dimension
    nmax = max(l.size for l in lays) if lays else 1
    logd = np.zeros((depth, nmax, d))
    offs = np.zeros((depth, nmax, d))
    sizes = np.zeros(depth, dtype=np.int64)
    rot = any(l.has_rotation for l in lays)
    orth = np.tile(np.eye(d), (depth, nmax, 1, 1)) if rot else None
    for i, l in enumerate(lays):
        n = l.size
        sizes[i] = n
        logd[i, :n] = l.log_scales
        offs[i, :n] = np.stack([m.offset for m in l.maps])
        if rot:
            orth[i, :n] = l.orthogonals
    if rot and any(l.anisotropic for l in lays):
        raise UnsupportedCompositionError(
            "system mixes rotations with anisotropic diagonal maps; compositions leave the diagonal class")
    return logd, sizes, offs, orth


def compose_batch(sys: LayerSystem, digits: np.ndarray, offsets: np.ndarray, start: int = 1,
                  tables: tuple | None = None) -> AffineBatch:
    """Composed affine forms for many words given as 0-based flat digits."""
    lengths = np.diff(offsets)
    w = lengths.shape[0]
    d = sys.dimension
    L = int(lengths.max()) if w else 0
    if tables is None:
        tables = layer_arrays(sys, max(L, 1), start)
    logd, _, offs, orth_t = tables
    logs = np.zeros((w, d))
    off = np.zeros((w, d))
    orth = np.tile(np.eye(d), (w, 1, 1)) if orth_t is not None else None
    # words sorted by length descending let each level work on a prefix slice
    order = np.argsort(-lengths, kind="stable")
    ls = lengths[order]
    starts = offsets[:-1][order]
    for lvl in range(L):
        k = int(np.count_nonzero(ls > lvl))
        if k == 0:
            break
        rows = order[:k]
        j = digits[starts[:k] + lvl]
        c = offs[lvl, j]
        if orth is None:
            off[rows] += np.exp(logs[rows]) * c
        else:
            off[rows] += np.exp(logs[rows]) * np.einsum("wab,wb->wa", orth[rows], c)
            orth[rows] = np.einsum("wab,wbc->wac", orth[rows], orth_t[lvl, j])
        logs[rows] += logd[lvl, j]
    return AffineBatch(logs, off, orth)


# ---------------------------------------------------------------------------
# cutsets


class Cutset:
    """The words of ``I_b`` (0-based flat digits) with lazily derived views."""

    def __init__(self, sys: LayerSystem, b: float, digits, offsets, logR, logr, start: int = 1):
        self.sys = sys
        self.b = b
        self.start = start
        self.digits = digits
        self.offsets = offsets
        self.logR = logR
        self.logr = logr

    def __len__(self):
        return self.logR.shape[0]

    @property
    def count_words(self) -> int:
        return len(self)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def word(self, i: int) -> Word:
        ds = tuple(int(j) + 1 for j in self.digits[self.offsets[i]:self.offsets[i + 1]])
        return Word(self.start, ds, float(self.logR[i]), float(self.logr[i]))

    @functools.cached_property
    def words(self) -> list:
        return [self.word(i) for i in range(len(self))]

    @functools.cached_property
    def affine(self) -> AffineBatch:
        return compose_batch(self.sys, self.digits, self.offsets, self.start)

    @functools.cached_property
    def _dedup(self) -> tuple:
        return self.affine.unique(self.sys.ambient.diameter)

    @property
    def map_labels(self) -> np.ndarray:
        """Class index of each word's composed map (equal index means same map in ``A_b``)."""
        return self._dedup[1]

    @property
    def count_maps(self) -> int:
        return int(self._dedup[0].shape[0])

    @functools.cached_property
    def maps(self) -> list:
        first = np.sort(self._dedup[0])
        return self.affine.to_maps(first)

    def images(self, box=None) -> tuple:
        box = self.sys.ambient if box is None else box
        return self.affine.box_images(box.lo, box.hi)

    def points(self, anchor=None) -> np.ndarray:
        a = self.sys.ambient.center if anchor is None else np.asarray(anchor, dtype=float)
        return self.affine.apply(a)

    def summary(self, include_words: bool = False) -> dict:
        ls = self.lengths
        out = {
            "b": self.b,
            "count_words": self.count_words,
            "count_maps": self.count_maps,
            "min_len": int(ls.min()) if ls.size else 0,
            "max_len": int(ls.max()) if ls.size else 0,
        }
        if include_words:
            out["words"] = [list(w.digits) for w in self.words]
        return out


def _empty_word_cutset(sys, b, start):
    return Cutset(sys, b, np.zeros(0, np.int32), np.zeros(2, np.int64), np.zeros(1), np.zeros(1), start)


def cutset(sys: LayerSystem, b: float, limit: int = DEFAULT_LIMIT, start: int = 1, backend=None) -> Cutset:
    """Enumerate ``I_b``: minimal words with ``R_J <= b`` (depth-first, lexicographic)."""
    b = float(b)
    if not b > 0:
        raise ValueError(f"b must be positive, got {b!r}")
    if limit < 1:
        raise ValueError("limit must be >= 1")
    if b >= 1.0:
        return _empty_word_cutset(sys, b, start)
    log_b = math.log(b)
    thr = log_b + scale_tol(log_b)
    src = sys.shift(start - 1) if start > 1 else sys
    depth = src.depth_for_scale(thr)
    logd, sizes, _, _ = layer_arrays(src, depth)
    k = _backend.get_kernels(backend)
    status, digits, offsets, logR, logr = k.enumerate_cutset(
        np.ascontiguousarray(logd), sizes, float(thr), int(limit))
    if status == -1:
        raise CutsetLimitError(int(offsets[0]), limit, b)
    if status == -2:
        raise ProviderRangeError(f"cutset at b={b:.6g} needs more than {depth} layers")
    return Cutset(sys, b, digits, offsets, logR, logr, start)


def cylinder_weight(sys: LayerSystem, w: WeightSequence, J: Word | Sequence[int]) -> float:
    """``log`` of the product of layer probabilities along ``J``."""
    if not isinstance(J, Word):
        J = Word(1, tuple(int(j) for j in J), 0.0, 0.0)
    total = 0.0
    for i, j in enumerate(J.digits):
        n = J.start + i
        lay = sys.layer(n)
        if not 1 <= j <= lay.size:
            raise ValueError(f"digit {j} invalid for layer {n} with {lay.size} maps")
        total += float(w.log_probs(lay, n + sys.offset)[j - 1])
    return total


def cutset_log_weights(cs: Cutset, w: WeightSequence) -> np.ndarray:
    """Vectorized :func:`cylinder_weight` over a whole cutset."""
    lengths = cs.lengths
    L = int(lengths.max()) if lengths.size else 0
    out = np.zeros(len(cs))
    starts = cs.offsets[:-1]
    sys = cs.sys
    for lvl in range(L):
        n = cs.start + lvl
        lay = sys.layer(n)
        lp = w.log_probs(lay, n + sys.offset)
        act = lengths > lvl
        out[act] += lp[cs.digits[starts[act] + lvl]]
    return out


# ---------------------------------------------------------------------------
# counting without enumeration


def log_cutset_count(sys: LayerSystem, b: float | None = None, max_states: int = 200_000, *,
                     log_b: float | None = None) -> float:
    """``log #I_b`` for similarity systems, by dynamic programming over ratio states.

    Words are grouped by their accumulated ``log R``; layers with a single
    ratio need no branching at all. Pass ``log_b`` for scales below float range.
    """
    if log_b is None:
        if b >= 1.0:
            return 0.0
        log_b = math.log(b)
    if log_b >= 0.0:
        return 0.0
    thr = log_b + scale_tol(log_b)
    depth = sys.depth_for_scale(thr)
    tab = sys.ratio_table(depth)
    if np.all(tab.uniform_layers()):
        cum = np.cumsum(tab.logr)
        m = int(np.searchsorted(-cum, -thr, side="left"))  # first index with cum <= thr
        return float(np.sum(tab.logm[:m + 1]))
    # states: accumulated log R -> log multiplicity
    states_R = np.zeros(1)
    states_m = np.zeros(1)
    done = []
    for i in range(depth):
        lr = tab.logr[tab.offsets[i]:tab.offsets[i + 1]]
        lm = tab.logm[tab.offsets[i]:tab.offsets[i + 1]]
        R = (states_R[:, None] + lr[None, :]).ravel()
        M = (states_m[:, None] + lm[None, :]).ravel()
        fin = R <= thr
        if np.any(fin):
            done.append(np.logaddexp.reduce(M[fin]))
        R, M = R[~fin], M[~fin]
        if R.size == 0:
            break
        key = np.round(R / (1e-12 * max(1.0, abs(thr))))
        uk, inv = np.unique(key, return_inverse=True)
        states_R = R[np.unique(inv.reshape(-1), return_index=True)[1]]
        states_m = np.full(uk.shape[0], -np.inf)
        np.logaddexp.at(states_m, inv.reshape(-1), M)
        if states_R.shape[0] > max_states:
            raise CutsetLimitError(states_R.shape[0], max_states, math.exp(log_b))
    return float(np.logaddexp.reduce(np.array(done))) if done else 0.0
