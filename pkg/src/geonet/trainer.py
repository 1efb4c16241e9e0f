"""Training, evaluation and orientation correction for GeoNet."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .datapipe import (
    AugmentConfig,
    DatasetSplit,
    LabeledSample,
    augmented_batch,
    build_samples,
    crop_side,
    eval_batch,
    load_slices,
    make_split,
    phantom_slices,
    preprocess_slices,
)
from .neural import GeoNet, sgd_step, softmax_xent
from .orient import N_PLANAR, get_2d, inverse_2d
from .pgm import write_atomic
from .raster import apply_2d, center_crop, clahe, resize_bilinear
from .validation import check_image

log = logging.getLogger(__name__)

EVAL_CHUNK = 64


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_loss: float
    test_accuracy: float


@dataclass(frozen=True)
class Evaluation:
    loss: float
    accuracy: float
    confusion: np.ndarray  # rows: true label, columns: predicted


@dataclass
class PreparedData:
    slices: list
    split: DatasetSplit
    train: list[LabeledSample]
    test: list[LabeledSample]


def prepare_data(cfg: TrainConfig) -> PreparedData:
    """Load or synthesize slices, equalize, split by slice and expand labels."""
    if cfg.data_dir:
        slices = load_slices(cfg.data_dir)
    else:
        slices = phantom_slices(cfg.n_slices, cfg.seed, cfg.phantom_size)
    if not slices:
        raise TrainingError("empty dataset")
    if cfg.clahe_mode == "pre":
        slices = preprocess_slices(slices, cfg.tile_grid, cfg.clahe_clip_limit, cfg.workers)
    split = make_split(len(slices), cfg.seed)
    kw = dict(clahe_mode=cfg.clahe_mode, tile_grid=cfg.tile_grid, clip_limit=cfg.clahe_clip_limit)
    return PreparedData(slices, split, build_samples(slices, split.train, **kw),
                        build_samples(slices, split.test, **kw))


def iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Shuffled index batches; a final batch shorter than 2 is dropped."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        if len(idx) >= 2:
            yield idx


def fit_epochs(model: GeoNet, train: list[LabeledSample], *, epochs: int, batch_size: int,
               learning_rate: float, augment_cfg: AugmentConfig, seed: int,
               test_x=None, test_y=None, workers: int = 1, callback=None) -> list[EpochMetrics]:
    """Mini-batch SGD over on-the-fly augmented samples.

    Train loss/accuracy are averaged over the epoch's training-mode
    forward passes. Test metrics (when ``test_x`` is given) come from
    :func:`evaluate` after each epoch; otherwise they are NaN.
    """
    if not train:
        raise TrainingError("empty training set")
    labels = np.array([s.label for s in train])
    history = []
    for epoch in range(1, epochs + 1):
        rng = np.random.default_rng([seed, 0x5EED, epoch])
        total_loss, correct, seen = 0.0, 0, 0
        for b, idx in enumerate(iter_batches(len(train), batch_size, rng)):
            x = augmented_batch([train[i] for i in idx], augment_cfg, epoch, workers)
            y = labels[idx]
            loss, logits = model.loss_and_grad(x, y)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss {loss} at epoch {epoch}, batch {b}")
            sgd_step(model.params, model.grads, learning_rate)
            total_loss += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y).sum())
            seen += len(idx)
        if seen == 0:
            raise TrainingError("no batch of at least 2 samples could be formed")
        if test_x is not None:
            ev = evaluate(model, test_x, test_y)
            test_loss, test_acc = ev.loss, ev.accuracy
        else:
            test_loss = test_acc = float("nan")
        m = EpochMetrics(epoch, total_loss / seen, correct / seen, test_loss, test_acc)
        history.append(m)
        if callback is not None:
            callback(m)
    return history


def train(cfg: TrainConfig, callback=None, data: PreparedData | None = None):
    """Run the full pipeline. Returns ``(model, metrics)``."""
    data = data if data is not None else prepare_data(cfg)
    aug = cfg.augment
    test_x = eval_batch(data.test, aug, cfg.workers) if data.test else None
    test_y = np.array([s.label for s in data.test])
    model = GeoNet(cfg.architecture, cfg.input_size, seed=cfg.seed)
    metrics = fit_epochs(
        model, data.train, epochs=cfg.epochs, batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate, augment_cfg=aug, seed=cfg.seed,
        test_x=test_x, test_y=test_y, workers=cfg.workers, callback=callback,
    )
    return model, metrics


def evaluate(model: GeoNet, x, labels) -> Evaluation:
    """Inference-mode loss, accuracy and 8x8 confusion counts.

    ``x`` is ``(N, 1, S, S)`` or ``(N, S, S)`` at the model's input size.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 3:
        x = x[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if x.ndim != 4 or x.shape[2:] != (model.input_size, model.input_size):
        raise ValueError(f"samples of shape {x.shape[1:]} do not match model input "
                         f"{model.input_size}x{model.input_size}")
    if len(x) != len(labels) or len(x) == 0:
        raise ValueError("need the same, non-zero number of samples and labels")
    logits = np.concatenate([model.forward(x[i:i + EVAL_CHUNK], training=False)
                             for i in range(0, len(x), EVAL_CHUNK)])
    loss, _ = softmax_xent(logits.astype(np.float64), labels)
    pred = logits.argmax(axis=1)
    k = model.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    return Evaluation(loss, float((pred == labels).mean()), confusion)


def normalize_for_model(img, input_size: int, preprocess=(8, 8, 2.0, 0.7)) -> np.ndarray:
    """CLAHE, centre crop and resize, as applied to test samples."""
    rows, cols, clip, crop_fraction = preprocess
    img = check_image(img, allow_empty=False)
    if rows > 0 and cols > 0:
        img = clahe(img, (rows, cols), clip)
    side = crop_side(*img.shape, crop_fraction)
    return resize_bilinear(center_crop(img, side), input_size, input_size)


def predict_orientation(model: GeoNet, img, preprocess=(8, 8, 2.0, 0.7)):
    """Return ``(label, probabilities)`` for one image at any resolution."""
    x = normalize_for_model(img, model.input_size, preprocess)
    probs = model.predict_proba(x[None, None].astype(np.float32))[0]
    return int(probs.argmax()), probs


def fix_orientation(model: GeoNet, img, preprocess=(8, 8, 2.0, 0.7)) -> np.ndarray:
    """Undo the predicted transform on the image as given (exact permutation)."""
    img = check_image(img, allow_empty=False)
    label, _ = predict_orientation(model, img, preprocess)
    return apply_2d(img, inverse_2d(get_2d(label)))


# artifacts ---------------------------------------------------------------

METRICS_HEADER = "epoch,train_loss,train_acc,test_loss,test_acc"


def format_metrics(metrics) -> str:
    buf = io.StringIO()
    buf.write(METRICS_HEADER + "\n")
    for m in metrics:
        buf.write(f"{m.epoch},{m.train_loss:.6g},{m.train_accuracy:.6g},"
                  f"{m.test_loss:.6g},{m.test_accuracy:.6g}\n")
    return buf.getvalue()


def write_metrics(path, metrics) -> None:
    write_atomic(Path(path), format_metrics(metrics).encode())


def read_metrics(path) -> list[EpochMetrics]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != METRICS_HEADER:
        raise ValueError(f"{path}: not a metrics file")
    out = []
    for line in lines[1:]:
        e, *vals = line.split(",")
        out.append(EpochMetrics(int(e), *(float(v) for v in vals)))
    return out


def format_confusion(confusion) -> str:
    return "".join("\t".join(str(int(v)) for v in row) + "\n" for row in confusion)


def write_confusion(path, confusion) -> None:
    write_atomic(Path(path), format_confusion(confusion).encode())


__all__ = [
    "EpochMetrics",
    "Evaluation",
    "PreparedData",
    "TrainingError",
    "evaluate",
    "fit_epochs",
    "fix_orientation",
    "format_confusion",
    "format_metrics",
    "normalize_for_model",
    "predict_orientation",
    "prepare_data",
    "read_metrics",
    "train",
    "write_confusion",
    "write_metrics",
    "N_PLANAR",
]
