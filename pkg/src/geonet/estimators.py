"""scikit-learn style estimators over the functional core.

Images are passed as a sequence of 2D arrays (or a 3D array), values in
[0, 1] or uint8. Sizes may differ between images.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .datapipe import AugmentConfig, LabeledSample, expand_labels
from .neural import GeoNet
from .neural.model import DEFAULT_ARCH
from .orient import N_PLANAR, get_2d, inverse_2d
from .raster import apply_2d, clahe
from .trainer import fit_epochs, normalize_for_model
from .validation import check_images, check_labels


class CLAHETransformer(TransformerMixin, BaseEstimator):
    """Contrast-limited adaptive histogram equalization, image by image."""

    def __init__(self, tile_grid=(8, 8), clip_limit=2.0):
        self.tile_grid = tile_grid
        self.clip_limit = clip_limit

    def fit(self, X, y=None):
        check_images(X)
        if min(self.tile_grid) < 1 or self.clip_limit < 1:
            raise ValueError("tile_grid entries and clip_limit must be >= 1")
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return [clahe(img, tuple(self.tile_grid), self.clip_limit) for img in check_images(X)]


class GeoNetClassifier(ClassifierMixin, BaseEstimator):
    """8-way orientation classifier trained with plain mini-batch SGD.

    ``fit`` takes images and their transform labels. Training samples are
    randomly cropped, jittered and resized every epoch; prediction uses
    the centre crop.
    """

    def __init__(self, epochs=32, batch_size=16, learning_rate=0.01, input_size=64,
                 arch=DEFAULT_ARCH, crop_fraction=0.7, max_jitter_degrees=10.0,
                 seed=0, workers=1):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.input_size = input_size
        self.arch = arch
        self.crop_fraction = crop_fraction
        self.max_jitter_degrees = max_jitter_degrees
        self.seed = seed
        self.workers = workers

    def _augment_config(self):
        return AugmentConfig(self.crop_fraction, self.input_size, self.max_jitter_degrees, self.seed)

    def _fit_samples(self, samples):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        self.model_ = GeoNet(self.arch, self.input_size, seed=self.seed)
        if self.model_.n_classes != N_PLANAR:
            raise ValueError(f"architecture must end in fc:{N_PLANAR}")
        self.history_ = fit_epochs(
            self.model_, samples, epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, augment_cfg=self._augment_config(),
            seed=self.seed, workers=self.workers,
        )
        self.classes_ = np.arange(N_PLANAR)
        return self

    def fit(self, X, y):
        imgs = check_images(X)
        y = check_labels(y, N_PLANAR)
        if len(imgs) != len(y):
            raise ValueError(f"{len(imgs)} images but {len(y)} labels")
        samples = [LabeledSample(img, int(lbl), f"x{i}") for i, (img, lbl) in enumerate(zip(imgs, y))]
        return self._fit_samples(samples)

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        pre = (0, 0, 1.0, self.crop_fraction)
        x = np.stack([normalize_for_model(img, self.input_size, pre) for img in check_images(X)])
        return self.model_.predict_proba(x[:, None].astype(np.float32))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)


class OrientationCorrector(TransformerMixin, BaseEstimator):
    """Self-supervised orientation fixer.

    ``fit`` receives canonically oriented slices only. Each is equalized and
    expanded into its 8 transformed copies with known labels, and a
    :class:`GeoNetClassifier` learns to recognise them. ``predict`` returns
    the label of the transform an image has undergone; ``transform``
    undoes it exactly.
    """

    def __init__(self, tile_grid=(8, 8), clip_limit=2.0, epochs=32, batch_size=16,
                 learning_rate=0.01, input_size=64, arch=DEFAULT_ARCH,
                 crop_fraction=0.7, max_jitter_degrees=10.0, seed=0, workers=1):
        self.tile_grid = tile_grid
        self.clip_limit = clip_limit
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.input_size = input_size
        self.arch = arch
        self.crop_fraction = crop_fraction
        self.max_jitter_degrees = max_jitter_degrees
        self.seed = seed
        self.workers = workers

    def _equalize(self, imgs):
        if self.tile_grid is None:
            return imgs
        return [clahe(img, tuple(self.tile_grid), self.clip_limit) for img in imgs]

    def fit(self, X, y=None):
        imgs = self._equalize(check_images(X))
        samples = [LabeledSample(t, lbl, f"s{i}")
                   for i, img in enumerate(imgs) for t, lbl in expand_labels(img)]
        params = {k: getattr(self, k) for k in (
            "epochs", "batch_size", "learning_rate", "input_size", "arch",
            "crop_fraction", "max_jitter_degrees", "seed", "workers")}
        self.classifier_ = GeoNetClassifier(**params)._fit_samples(samples)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "classifier_")
        return self.classifier_.predict_proba(self._equalize(check_images(X)))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def transform(self, X):
        imgs = check_images(X)
        labels = self.predict(imgs)
        return [apply_2d(img, inverse_2d(get_2d(int(lbl)))) for img, lbl in zip(imgs, labels)]
