"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
from __future__ import annotations

import numpy as np


def check_image(img, *, allow_empty: bool = True, dtype=np.float64) -> np.ndarray:
    """Return ``img`` as a 2D float array with values in [0, 1]."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError("image is empty")
    if arr.dtype == np.uint8:
        arr = arr.astype(dtype) / 255.0
    elif arr.dtype != dtype:
        arr = arr.astype(dtype)
    if arr.size and (not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("pixel values must be finite and lie in [0, 1]")
    return arr


def check_stack(stack) -> np.ndarray:
    arr = np.asarray(stack)
    if arr.ndim != 3:
        raise ValueError(f"expected a (frames, rows, cols) stack, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValueError("a serial image needs at least 2 frames")
    return np.stack([check_image(f, allow_empty=False) for f in arr])


def check_images(X) -> list[np.ndarray]:
    """A batch of images: a 3D array or a sequence of (possibly ragged) 2D arrays."""
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise ValueError("expected a collection of images, got a single 2D array")
    imgs = [check_image(x, allow_empty=False) for x in X]
    if not imgs:
        raise ValueError("no images supplied")
    return imgs


def check_labels(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or not np.issubdtype(y.dtype, np.integer):
        raise ValueError("labels must be a 1D integer array")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    return y.astype(np.int64)
