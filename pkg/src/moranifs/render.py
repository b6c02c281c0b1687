"""Rasterize 1D/2D point clouds to binary PPM or SVG."""

from __future__ import annotations

import numpy as np


def _bounds(points: np.ndarray, lo=None, hi=None):
    lo = points.min(axis=0) if lo is None else np.asarray(lo, dtype=float)
    hi = points.max(axis=0) if hi is None else np.asarray(hi, dtype=float)
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo, span


def _as_2d(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[1] == 1:
        return np.column_stack([points[:, 0], np.full(points.shape[0], 0.5)])
    if points.shape[1] != 2:
        raise ValueError("only 1D and 2D clouds can be rendered")
    return points


def raster(points, width: int, height: int, gamma: float = 1.0, lo=None, hi=None) -> np.ndarray:
    """``(height, width)`` uint8 image, white density on black."""
    one_d = np.asarray(points).ndim == 1 or np.asarray(points).shape[1] == 1
    pts = _as_2d(points)
    if one_d:
        lo = None if lo is None else [np.atleast_1d(lo)[0], 0.0]
        hi = None if hi is None else [np.atleast_1d(hi)[0], 1.0]
    lo, span = _bounds(pts, lo, hi)
    u = (pts - lo) / span
    col = np.clip((u[:, 0] * (width - 1)).round().astype(int), 0, width - 1)
    if one_d:
        img = np.zeros((height, width))
        hist = np.bincount(col, minlength=width).astype(float)
        img[:] = hist[None, :]
    else:
        row = np.clip(((1 - u[:, 1]) * (height - 1)).round().astype(int), 0, height - 1)
        img = np.zeros((height, width))
        np.add.at(img, (row, col), 1.0)
    m = img.max()
    if m > 0:
        img = (img / m) ** (1.0 / gamma)
    return (img * 255).round().astype(np.uint8)


def write_ppm(path, points, width=512, height=512, gamma=1.0, lo=None, hi=None) -> None:
    img = raster(points, width, height, gamma, lo, hi)
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def write_svg(path, points, width=512, height=512, radius=0.75, lo=None, hi=None) -> None:
    one_d = np.asarray(points).ndim == 1 or np.asarray(points).shape[1] == 1
    pts = _as_2d(points)
    if one_d:
        lo = None if lo is None else [np.atleast_1d(lo)[0], 0.0]
        hi = None if hi is None else [np.atleast_1d(hi)[0], 1.0]
    lo, span = _bounds(pts, lo, hi)
    u = (pts - lo) / span
    x = u[:, 0] * (width - 1)
    y = (1 - u[:, 1]) * (height - 1)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        '<g fill="black">',
    ]
    lines += [f'<circle cx="{a:.3f}" cy="{b:.3f}" r="{radius}"/>' for a, b in zip(x, y)]
    lines += ["</g>", "</svg>", ""]
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
