"""Binary 8-bit PGM (P5) reading and writing."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .raster import quantize


class PGMError(ValueError):
    pass


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens and the offset just past the single
    whitespace byte that ends the header."""
    toks, i, n = [], 0, len(data)
    while len(toks) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if start == i:
            raise PGMError("truncated header")
        toks.append(data[start:i])
    if i >= n:
        raise PGMError("missing pixel data")
    return toks, i + 1


def decode_pgm(data: bytes) -> np.ndarray:
    """Decode P5 bytes to a uint8 array."""
    if data[:2] != b"P5":
        raise PGMError("not a binary PGM (missing P5 magic)")
    toks, offset = _tokens(data, 4)
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as e:
        raise PGMError(f"bad header field: {e}") from None
    if w < 1 or h < 1:
        raise PGMError(f"bad dimensions {w}x{h}")
    if not 0 < maxval < 256:
        raise PGMError(f"unsupported maxval {maxval} (8-bit only)")
    if len(data) - offset < w * h:
        raise PGMError(f"expected {w * h} pixel bytes, found {len(data) - offset}")
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=offset).reshape(h, w)
    if maxval != 255:
        arr = np.rint(arr.astype(np.float64) * (255.0 / maxval)).astype(np.uint8)
    return arr.copy()


def encode_pgm(levels: np.ndarray) -> bytes:
    levels = np.asarray(levels, dtype=np.uint8)
    h, w = levels.shape
    return b"P5\n%d %d\n255\n" % (w, h) + levels.tobytes()


def read_pgm(path) -> np.ndarray:
    """Read a PGM as a float image in [0, 1]. Errors name the file."""
    path = Path(path)
    try:
        return decode_pgm(path.read_bytes()).astype(np.float64) / 255.0
    except (OSError, PGMError) as e:
        raise PGMError(f"{path}: {e}") from e


def write_atomic(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(path, img) -> None:
    """Write a [0, 1] image (or uint8 levels) as P5, quantizing by round(v*255)."""
    arr = np.asarray(img)
    levels = arr if arr.dtype == np.uint8 else quantize(arr)
    write_atomic(path, encode_pgm(levels))


def read_image(path) -> np.ndarray:
    """PGM, or any grayscale format Pillow can open."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm") or not path.suffix:
        return read_pgm(path)
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover
        raise PGMError(f"{path}: reading {path.suffix} needs Pillow") from None
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    except OSError as e:
        raise PGMError(f"{path}: {e}") from e
