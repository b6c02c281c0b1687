"""Pure numpy implementations of the hot kernels.

Same signatures and results as the compiled ``_kernels`` module; selected
automatically when the extension is missing or ``MORANIFS_PURE=1``.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def enumerate_cutset(logd, sizes, thr, limit):
    """Words whose per-axis log-contraction max first drops to ``<= thr``.

    ``logd[level, j, axis]`` is the log contraction of map ``j`` of layer
    ``level`` (0-based). Returns ``(status, digits, offsets, logR, logr)``;
    ``status`` is 0 on success, -1 when more than ``limit`` words would be
    emitted (``offsets`` then holds the count reached as a 1-element array),
    -2 when the table is too shallow.
    """
    depth, _, d = logd.shape
    front_sums = np.zeros((1, d))
    front_digits = np.zeros((1, 0), dtype=np.int32)
    out_digits, out_R, out_r = [], [], []
    emitted = 0
    for level in range(depth):
        n = int(sizes[level])
        f = front_sums.shape[0]
        if f * n > 50 * limit + 1_000_000:
            return -1, None, np.array([emitted]), None, None
        sums = (front_sums[:, None, :] + logd[level, :n, :][None, :, :]).reshape(f * n, d)
        digits = np.concatenate(
            [np.repeat(front_digits, n, axis=0),
             np.tile(np.arange(n, dtype=np.int32), f)[:, None]], axis=1)
        R = sums.max(axis=1)
        done = R <= thr
        k = int(done.sum())
        if emitted + k > limit:
            return -1, None, np.array([emitted + k]), None, None
        if k:
            out_digits.append(digits[done])
            out_R.append(R[done])
            out_r.append(sums[done].min(axis=1))
            emitted += k
        keep = ~done
        front_sums = sums[keep]
        front_digits = digits[keep]
        if front_sums.shape[0] == 0:
            break
    else:
        if front_sums.shape[0]:
            return -2, None, np.array([emitted]), None, None
    if not out_digits:
        return 0, np.zeros(0, np.int32), np.zeros(1, np.int64), np.zeros(0), np.zeros(0)
    width = max(a.shape[1] for a in out_digits)
    padded = np.concatenate(
        [np.pad(a, ((0, 0), (0, width - a.shape[1])), constant_values=-1) for a in out_digits])
    R = np.concatenate(out_R)
    r = np.concatenate(out_r)
    order = np.lexsort(padded.T[::-1])
    padded, R, r = padded[order], R[order], r[order]
    lengths = (padded >= 0).sum(axis=1)
    offsets = np.zeros(len(lengths) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(lengths)
    flat = padded[padded >= 0].astype(np.int32)
    return 0, flat, offsets, R, r


def moran_layers(logr, logm, offsets, s):
    """Per-layer ``log sum_j m_j r_j**s``."""
    v = s * logr + logm
    starts = offsets[:-1]
    mx = np.maximum.reduceat(v, starts)
    lens = np.diff(offsets)
    ex = np.exp(v - np.repeat(mx, lens))
    return mx + np.log(np.add.reduceat(ex, starts))


def moran_eval(logr, logm, offsets, k, s):
    """``F_k(s)`` and ``dF_k/ds`` over the first ``k`` layers."""
    end = offsets[k]
    lr, lm, off = logr[:end], logm[:end], offsets[:k + 1]
    v = s * lr + lm
    starts = off[:-1]
    lens = np.diff(off)
    mx = np.maximum.reduceat(v, starts)
    ex = np.exp(v - np.repeat(mx, lens))
    den = np.add.reduceat(ex, starts)
    num = np.add.reduceat(ex * lr, starts)
    return float(np.sum(mx + np.log(den))), float(np.sum(num / den))


def _candidates(keys, order, sorted_keys, deltas):
    w = keys.shape[0]
    rows, cols = [], []
    for dk in deltas:
        tgt = keys + dk
        left = np.searchsorted(sorted_keys, tgt, side="left")
        right = np.searchsorted(sorted_keys, tgt, side="right")
        cnt = right - left
        tot = int(cnt.sum())
        if tot == 0:
            continue
        i = np.repeat(np.arange(w), cnt)
        start = np.repeat(left, cnt)
        within = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        rows.append(i)
        cols.append(order[start + within])
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def _intersecting(lo, hi, i, j, tol):
    return np.all((lo[i] <= hi[j] + tol) & (lo[j] <= hi[i] + tol), axis=1)


def neighbor_counts(lo, hi, labels, n_labels, keys, order, sorted_keys, deltas, tol):
    """For each box, the number of distinct labels among intersecting boxes (self included)."""
    i, j = _candidates(keys, order, sorted_keys, deltas)
    hit = _intersecting(lo, hi, i, j, tol)
    i, j = i[hit], j[hit]
    combo = np.unique(i.astype(np.int64) * n_labels + labels[j])
    return np.bincount(combo // n_labels, minlength=lo.shape[0]).astype(np.int64)


def neighbor_pairs(lo, hi, keys, order, sorted_keys, deltas, tol, max_pairs):
    """Intersecting pairs ``(i, j)`` with ``i < j``; status -1 if more than ``max_pairs``."""
    i, j = _candidates(keys, order, sorted_keys, deltas)
    keep = i < j
    i, j = i[keep], j[keep]
    hit = _intersecting(lo, hi, i, j, tol)
    i, j = i[hit], j[hit]
    if i.shape[0] > max_pairs:
        return -1, None, None
    o = np.lexsort((j, i))
    return 0, i[o], j[o]
