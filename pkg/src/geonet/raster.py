"""Grayscale rasters: exact orientation transforms, CLAHE, resampling and
histograms.

Images are 2D float arrays with values in [0, 1]; stacks of frames are 3D
arrays ``(frames, rows, cols)``.
"""
from __future__ import annotations

import math

import numpy as np

from .orient import OrientTransform2D, OrientTransform3D, SerialTransform
from .validation import check_image, check_stack

__all__ = [
    "apply_2d",
    "apply_3d",
    "apply_serial",
    "clahe",
    "histogram",
    "entropy",
    "quantize",
    "resize_bilinear",
    "rotate_small",
    "center_crop",
]


def _signed_permutation(matrix: np.ndarray) -> tuple[list[int], list[int]]:
    """(source coordinate, sign) for every output coordinate of ``p' = M p``."""
    src, sign = [], []
    for row in np.asarray(matrix):
        (nz,) = np.nonzero(row)
        if len(nz) != 1 or abs(row[nz[0]]) != 1:
            raise ValueError(f"not a signed permutation matrix: {matrix.tolist()}")
        src.append(int(nz[0]))
        sign.append(int(row[nz[0]]))
    return src, sign


def _apply_signed_permutation(arr: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    # Coordinates are ordered (x, y, z, ...) while array axes run (..., z, y, x).
    d = matrix.shape[0]
    src, sign = _signed_permutation(matrix)
    axis = lambda c: d - 1 - c  # noqa: E731
    # output coordinate i is input coordinate src[i] (negated if sign < 0)
    axes = [axis(src[d - 1 - a]) for a in range(d)]
    out = np.transpose(arr, axes)
    flips = tuple(a for a in range(d) if sign[d - 1 - a] < 0)
    if flips:
        out = np.flip(out, axis=flips)
    return np.ascontiguousarray(out)


def apply_2d(img, t: OrientTransform2D) -> np.ndarray:
    """Exact pixel permutation of ``img`` by ``t`` (shape swaps when ``t``
    exchanges axes)."""
    img = check_image(img, allow_empty=False)
    return _apply_signed_permutation(img, t.matrix)


def apply_3d(vol, t: OrientTransform3D) -> np.ndarray:
    vol = np.asarray(vol)
    if vol.ndim != 3 or vol.size == 0:
        raise ValueError(f"expected a non-empty 3D volume, got shape {vol.shape}")
    return _apply_signed_permutation(vol, t.matrix)


def apply_serial(stack, st: SerialTransform) -> np.ndarray:
    stack = check_stack(stack)
    out = np.stack([apply_2d(f, st.planar) for f in stack])
    if st.time_reversed:
        out = out[::-1].copy()
    return out


def quantize(img) -> np.ndarray:
    """8-bit levels ``round(v * 255)``."""
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def histogram(img) -> np.ndarray:
    img = check_image(img)
    return np.bincount(quantize(img).ravel(), minlength=256).astype(np.int64)


def entropy(img) -> float:
    """Shannon entropy (bits) of the 8-bit histogram."""
    h = histogram(img).astype(np.float64)
    p = h[h > 0] / h.sum()
    return float(-(p * np.log2(p)).sum())


def _tile_edges(n: int, k: int) -> np.ndarray:
    return np.array([(i * n) // k for i in range(k + 1)])


def _tile_lut(levels: np.ndarray, clip_limit: float, nbins: int):
    """Equalization LUT for one tile, or None for a single-bin tile."""
    hist = np.bincount(levels.ravel(), minlength=nbins).astype(np.float64)
    n = levels.size
    if np.count_nonzero(hist) <= 1:
        return None
    if math.isfinite(clip_limit):
        ceiling = clip_limit * n / nbins
        excess = np.maximum(hist - ceiling, 0.0).sum()
        hist = np.minimum(hist, ceiling) + excess / nbins
    return np.cumsum(hist) / n


def _interp_weights(n: int, edges: np.ndarray):
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    pos = np.arange(n, dtype=np.float64)
    k = len(centers)
    hi = np.searchsorted(centers, pos, side="right")
    lo = np.clip(hi - 1, 0, k - 1)
    hi = np.clip(hi, 0, k - 1)
    span = centers[hi] - centers[lo]
    w = np.where(span > 0, (pos - centers[lo]) / np.where(span > 0, span, 1.0), 0.0)
    return lo, hi, np.clip(w, 0.0, 1.0)


def clahe(img, tile_grid=(8, 8), clip_limit: float = 2.0, nbins: int = 256) -> np.ndarray:
    """Contrast-limited adaptive histogram equalization.

    Each tile gets an equalization mapping built from its clipped
    histogram (``clip_limit`` in multiples of the uniform bin height,
    excess spread evenly over all bins; ``inf`` disables clipping).
    Mappings are blended bilinearly between tile centers. A tile whose
    histogram occupies a single bin maps through the identity.
    """
    img = check_image(img, allow_empty=False)
    rows, cols = (int(v) for v in tile_grid)
    if rows < 1 or cols < 1:
        raise ValueError(f"tile_grid must be >= (1, 1), got {tile_grid}")
    if not clip_limit >= 1.0:
        raise ValueError(f"clip_limit must be >= 1, got {clip_limit}")
    h, w = img.shape
    if h < rows or w < cols:
        raise ValueError(f"image {h}x{w} is smaller than the {rows}x{cols} tile grid")

    levels = np.clip(np.rint(img * (nbins - 1)), 0, nbins - 1).astype(np.intp)
    ye, xe = _tile_edges(h, rows), _tile_edges(w, cols)
    luts = np.zeros((rows, cols, nbins))
    identity = np.zeros((rows, cols), dtype=bool)
    for i in range(rows):
        for j in range(cols):
            lut = _tile_lut(levels[ye[i]:ye[i + 1], xe[j]:xe[j + 1]], clip_limit, nbins)
            if lut is None:
                identity[i, j] = True
            else:
                luts[i, j] = lut
    if identity.all():
        return img.copy()

    y0, y1, wy = _interp_weights(h, ye)
    x0, x1, wx = _interp_weights(w, xe)
    wy, wx = wy[:, None], wx[None, :]
    Y0, Y1, X0, X1 = y0[:, None], y1[:, None], x0[None, :], x1[None, :]

    def mapped(Y, X):
        # single-bin tiles pass the input value through unchanged
        return np.where(identity[Y, X], img, luts[Y, X, levels])

    out = (
        (1 - wy) * ((1 - wx) * mapped(Y0, X0) + wx * mapped(Y0, X1))
        + wy * ((1 - wx) * mapped(Y1, X0) + wx * mapped(Y1, X1))
    )
    return np.clip(out, 0.0, 1.0)


def _sample_bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear samples at fractional (row, col) positions; pixels outside
    the grid read as 0."""
    h, w = img.shape
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    fy = ys - y0
    fx = xs - x0
    padded = np.zeros((h + 2, w + 2), dtype=img.dtype)
    padded[1:-1, 1:-1] = img
    # shift into padded frame; anything further out collapses onto the zero border
    yy0 = np.clip(y0 + 1, 0, h + 1)
    yy1 = np.clip(y0 + 2, 0, h + 1)
    xx0 = np.clip(x0 + 1, 0, w + 1)
    xx1 = np.clip(x0 + 2, 0, w + 1)
    top = padded[yy0, xx0] * (1 - fx) + padded[yy0, xx1] * fx
    bot = padded[yy1, xx0] * (1 - fx) + padded[yy1, xx1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize with edge clamping."""
    img = check_image(img, allow_empty=False)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be >= 1, got {out_h}x{out_w}")
    h, w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    # a + (b - a) * t keeps constant regions exact
    a, b = img[y0][:, x0], img[y0][:, x1]
    top = a + (b - a) * fx
    a, b = img[y1][:, x0], img[y1][:, x1]
    bot = a + (b - a) * fx
    return np.clip(top + (bot - top) * fy, 0.0, 1.0)


def rotate_small(img, angle_degrees: float) -> np.ndarray:
    """Rotate counterclockwise about the image center by less than 45 degrees,
    bilinear sampling, zero fill."""
    if not abs(angle_degrees) < 45:
        raise ValueError(f"jitter angle must satisfy |angle| < 45, got {angle_degrees}")
    img = check_image(img, allow_empty=False)
    if angle_degrees == 0:
        return img.copy()
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    a = math.radians(angle_degrees)
    c, s = math.cos(a), math.sin(a)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    # inverse map: source = R(-a) * dest, with y pointing down
    xs = c * dx - s * dy + cx
    ys = s * dx + c * dy + cy
    return np.clip(_sample_bilinear(img, ys, xs), 0.0, 1.0)


def center_crop(img, side: int) -> np.ndarray:
    img = check_image(img, allow_empty=False)
    h, w = img.shape
    if not 1 <= side <= min(h, w):
        raise ValueError(f"crop side {side} does not fit a {h}x{w} image")
    top, left = (h - side) // 2, (w - side) // 2
    return img[top:top + side, left:left + side]
