"""Kernel selection and the shared spatial-hash layout.

The compiled ``_kernels`` extension is used when importable; set
``MORANIFS_PURE=1`` to force the numpy fallback.
"""

from __future__ import annotations

import itertools
import os

import numpy as np

from . import _pykernels

if os.environ.get("MORANIFS_PURE", "") not in ("", "0"):
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = _pykernels

BACKEND = kernels.BACKEND


def get_kernels(name: str | None = None):
    """Kernel module by name (``"cython"``/``"python"``), default the active one."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels  # type: ignore[attr-defined]
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def spatial_layout(lo: np.ndarray, hi: np.ndarray, tol: float):
    """Uniform-grid hash of boxes: ``(keys, order, sorted_keys, deltas)``.

    Cell side is the largest box extent plus slack, so two boxes that touch
    within ``tol`` have lower corners in the same or adjacent cells.
    """
    w, d = lo.shape
    if w == 0:
        z = np.zeros(0, np.int64)
        return z, z, z, np.zeros(1, np.int64)
    h = float(np.max(hi - lo)) + 2.0 * tol
    span_total = float(np.max(lo.max(axis=0) - lo.min(axis=0)))
    if h <= 0.0:
        h = max(span_total, 1.0)
    h *= 1.0 + 1e-9
    base = lo.min(axis=0)
    while True:
        cells = np.floor((lo - base) / h).astype(np.int64) + 1
        spans = cells.max(axis=0) + 2
        if float(np.prod(spans.astype(float))) < 2.0 ** 62:
            break
        h *= 2.0
    strides = np.ones(d, dtype=np.int64)
    for a in range(1, d):
        strides[a] = strides[a - 1] * spans[a - 1]
    keys = cells @ strides
    order = np.argsort(keys, kind="stable").astype(np.int64)
    sorted_keys = np.ascontiguousarray(keys[order])
    deltas = np.array([int(np.dot(off, strides)) for off in itertools.product((-1, 0, 1), repeat=d)],
                      dtype=np.int64)
    return np.ascontiguousarray(keys), order, sorted_keys, deltas


def neighbor_counts(lo, hi, labels, n_labels, tol, backend=None):
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    keys, order, sk, deltas = spatial_layout(lo, hi, tol)
    k = get_kernels(backend)
    return k.neighbor_counts(lo, hi, np.ascontiguousarray(labels, dtype=np.int64), int(n_labels),
                             keys, order, sk, deltas, float(tol))


def neighbor_pairs(lo, hi, tol, max_pairs, backend=None):
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    keys, order, sk, deltas = spatial_layout(lo, hi, tol)
    k = get_kernels(backend)
    return k.neighbor_pairs(lo, hi, keys, order, sk, deltas, float(tol), int(max_pairs))
