"""Labelled-sample generation for the orientation pretext task.

Every source slice yields 8 samples, one per planar transform. Splits are
drawn per source slice so the 8 variants of a slice never straddle
train and test. Per-sample randomness is keyed on
``(seed, source_id, epoch, label)`` and never on processing order.
"""
from __future__ import annotations

import csv
import math
import os
import shutil
import tempfile
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .orient import N_PLANAR, enumerate_2d, enumerate_serial
from .pgm import PGMError, read_pgm, write_pgm
from .raster import apply_2d, apply_serial, center_crop, clahe, resize_bilinear, rotate_small
from .validation import check_image

TRAIN_FRACTION_NUM, TRAIN_FRACTION_DEN = 4, 5


@dataclass(frozen=True)
class LabeledSample:
    image: np.ndarray
    label: int
    source_id: str


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    test: list
    seed: int


@dataclass(frozen=True)
class AugmentConfig:
    crop_fraction: float = 0.7
    out_size: int = 256
    max_jitter_degrees: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.crop_fraction <= 1:
            raise ValueError(f"crop_fraction must be in (0, 1], got {self.crop_fraction}")
        if self.out_size < 8:
            raise ValueError(f"out_size must be >= 8, got {self.out_size}")
        if not 0 <= self.max_jitter_degrees < 45:
            raise ValueError(f"max_jitter_degrees must be in [0, 45), got {self.max_jitter_degrees}")


def crop_side(h: int, w: int, crop_fraction: float) -> int:
    """Side of the square window covering ``crop_fraction`` of the area of
    a ``min(h, w)``-sided square."""
    side = math.floor(math.sqrt(crop_fraction) * min(h, w))
    if side < 1:
        raise ValueError(f"crop window for {h}x{w} at fraction {crop_fraction} is empty")
    return side


def expand_labels(img, source_id=None) -> list[tuple[np.ndarray, int]]:
    """``[(apply_2d(img, t_y), y) for y in 0..7]``."""
    img = check_image(img, allow_empty=False)
    return [(apply_2d(img, t), t.label) for t in enumerate_2d()]


def expand_serial(stack, source_id=None) -> list[tuple[np.ndarray, int]]:
    """16 labelled variants of a serial image (planar transform x frame order)."""
    return [(apply_serial(stack, st), st.label) for st in enumerate_serial()]


def make_split(n_slices: int, seed: int) -> DatasetSplit:
    """Shuffle slice indices with ``seed``; the first floor(0.8 n) train."""
    if n_slices < 5:
        raise ValueError(f"need at least 5 slices to split, got {n_slices}")
    perm = np.random.default_rng(seed).permutation(n_slices)
    n_train = (TRAIN_FRACTION_NUM * n_slices) // TRAIN_FRACTION_DEN
    return DatasetSplit(sorted(perm[:n_train].tolist()), sorted(perm[n_train:].tolist()), seed)


def sample_rng(seed: int, source_id, epoch: int, label: int) -> np.random.Generator:
    key = zlib.crc32(str(source_id).encode("utf-8"))
    return np.random.default_rng([int(seed), key, int(epoch), int(label)])


def augment(img, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """Jitter-rotate, random square crop, then resize to ``cfg.out_size``."""
    img = check_image(img, allow_empty=False)
    h, w = img.shape
    side = crop_side(h, w, cfg.crop_fraction)
    if side < 1:
        raise ValueError(f"crop window does not fit a {h}x{w} image")
    angle = rng.uniform(-cfg.max_jitter_degrees, cfg.max_jitter_degrees)
    if cfg.max_jitter_degrees > 0:
        img = rotate_small(img, angle)
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    window = img[top:top + side, left:left + side]
    return resize_bilinear(window, cfg.out_size, cfg.out_size)


def eval_view(img, cfg: AugmentConfig) -> np.ndarray:
    """Deterministic counterpart of :func:`augment`: centre crop and resize."""
    img = check_image(img, allow_empty=False)
    side = crop_side(*img.shape, cfg.crop_fraction)
    if side < 1:
        raise ValueError(f"crop window does not fit a {img.shape[0]}x{img.shape[1]} image")
    return resize_bilinear(center_crop(img, side), cfg.out_size, cfg.out_size)


def synth_phantom(seed: int, h: int = 80, w: int = 80) -> np.ndarray:
    """Cardiac-like test slice with no symmetry under the 8 planar transforms.

    Dark background, a body ellipse, a bright ring placed up and left of
    centre whose brightness winds around it, a crescent on the ring's lower
    right, a small bright blob low on the right edge, and mild noise.
    Geometry jitters with ``seed``; the layout that defines the upright
    orientation does not.
    """
    if h < 32 or w < 32:
        raise ValueError(f"phantom needs h, w >= 32, got {h}x{w}")
    rng = np.random.default_rng(seed)
    s = min(h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cy, cx = (h - 1) / 2, (w - 1) / 2

    img = np.full((h, w), 0.04)
    ey, ex = 0.40 * h * rng.uniform(0.95, 1.05), 0.46 * w * rng.uniform(0.95, 1.05)
    body = ((yy - cy) / ey) ** 2 + ((xx - cx) / ex) ** 2 <= 1
    img[body] = 0.22 + 0.06 * (xx[body] - cx) / w  # faint left-right shading

    ry = cy - s * rng.uniform(0.08, 0.12)
    rx = cx - s * rng.uniform(0.10, 0.14)
    r_out = s * rng.uniform(0.17, 0.20)
    r_in = r_out * rng.uniform(0.58, 0.66)
    d = np.hypot(yy - ry, xx - rx)
    theta = np.arctan2(yy - ry, xx - rx)  # y down: increases clockwise on screen
    ring = (d <= r_out) & (d >= r_in)
    img[ring] = 0.45 + 0.4 * ((theta[ring] + np.pi) / (2 * np.pi))
    img[d < r_in] = 0.12  # blood pool

    a = np.deg2rad(rng.uniform(30, 50))
    c_y, c_x = ry + r_out * np.sin(a), rx + r_out * np.cos(a)
    rc = 0.45 * r_out
    shift = 0.45 * rc
    crescent = (np.hypot(yy - c_y, xx - c_x) <= rc) & (
        np.hypot(yy - c_y + shift * np.sin(a), xx - c_x + shift * np.cos(a)) > rc
    )
    img[crescent] = 0.97

    by, bx = cy + 0.28 * h, cx + 0.27 * w
    blob = np.hypot(yy - by, xx - bx) <= s * 0.06
    img[blob] = 0.75

    img += rng.normal(0, 0.015, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def phantom_slices(n: int, seed: int, size: int = 80) -> list[tuple[str, np.ndarray]]:
    seeds = np.random.SeedSequence([int(seed), 0x9E0]).generate_state(n)
    return [(f"phantom{i:04d}", synth_phantom(int(s), size, size)) for i, s in enumerate(seeds)]


def load_slices(dir_path) -> list[tuple[str, np.ndarray]]:
    """PGM files in ``dir_path``, sorted by filename; ids are file stems."""
    root = Path(dir_path)
    if not root.is_dir():
        raise FileNotFoundError(f"{root}: not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() == ".pgm" and p.is_file())
    if not files:
        raise ValueError(f"{root}: no .pgm files found")
    return [(p.stem, read_pgm(p)) for p in files]


def preprocess_slices(slices, tile_grid=(8, 8), clip_limit=2.0, workers: int = 1):
    """CLAHE each ``(source_id, image)`` pair."""
    def one(item):
        sid, img = item
        return sid, clahe(img, tile_grid, clip_limit)

    return _map(one, slices, workers)


def build_samples(slices, ids, *, clahe_mode="pre", tile_grid=(8, 8), clip_limit=2.0):
    """Expanded ``LabeledSample`` list (pre-augmentation) for the chosen slices.

    ``clahe_mode="pre"`` expects already-equalized slices; ``"post"``
    equalizes each transformed image; ``"none"`` skips equalization.
    """
    out = []
    for i in ids:
        sid, img = slices[i]
        for timg, y in expand_labels(img, sid):
            if clahe_mode == "post":
                timg = clahe(timg, tile_grid, clip_limit)
            out.append(LabeledSample(timg, y, sid))
    return out


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def augmented_batch(samples, cfg: AugmentConfig, epoch: int, workers: int = 1) -> np.ndarray:
    """Stack of augmented images ``(n, 1, S, S)`` in ``samples`` order."""
    def one(s):
        return augment(s.image, cfg, sample_rng(cfg.seed, s.source_id, epoch, s.label))

    imgs = _map(one, samples, workers)
    return np.stack(imgs)[:, None].astype(np.float32)


def eval_batch(samples, cfg: AugmentConfig, workers: int = 1) -> np.ndarray:
    imgs = _map(lambda s: eval_view(s.image, cfg), samples, workers)
    return np.stack(imgs)[:, None].astype(np.float32)


def materialize(slices, split: DatasetSplit, out_dir, *, clahe_mode="pre", tile_grid=(8, 8),
                clip_limit=2.0) -> Path:
    """Write ``train/<label>/<source>_<label>.pgm``, ``test/...`` and
    ``manifest.tsv`` under ``out_dir``.

    The tree is assembled in a temporary sibling directory and moved into
    place at the end, so a failure leaves nothing behind. ``out_dir`` must
    not exist or be empty.
    """
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()):
        raise FileExistsError(f"{out_dir}: output directory is not empty")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    if clahe_mode == "pre":
        slices = preprocess_slices(slices, tile_grid, clip_limit)
    tmp = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=f".{out_dir.name}."))
    try:
        rows = []
        for part, ids in (("train", split.train), ("test", split.test)):
            for y in range(N_PLANAR):
                (tmp / part / str(y)).mkdir(parents=True)
            for s in build_samples(slices, ids, clahe_mode=clahe_mode, tile_grid=tile_grid,
                                   clip_limit=clip_limit):
                rel = Path(part) / str(s.label) / f"{s.source_id}_{s.label}.pgm"
                write_pgm(tmp / rel, s.image)
                rows.append((part, s.source_id, s.label, rel.as_posix()))
        with open(tmp / "manifest.tsv", "w", newline="") as f:
            writer = csv.writer(f, delimiter="\t", lineterminator="\n")
            writer.writerow(["split", "source_id", "label", "path"])
            writer.writerows(rows)
        if out_dir.exists():
            out_dir.rmdir()
        os.replace(tmp, out_dir)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out_dir


def write_slices(slices, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for sid, img in slices:
        write_pgm(out_dir / f"{sid}.pgm", img)


__all__ = [
    "AugmentConfig",
    "DatasetSplit",
    "LabeledSample",
    "PGMError",
    "augment",
    "augmented_batch",
    "build_samples",
    "crop_side",
    "eval_batch",
    "eval_view",
    "expand_labels",
    "expand_serial",
    "load_slices",
    "make_split",
    "materialize",
    "phantom_slices",
    "preprocess_slices",
    "sample_rng",
    "synth_phantom",
    "write_slices",
]
