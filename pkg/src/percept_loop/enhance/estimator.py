"""Scikit-learn style wrapper around the enhancer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..iqa.model import QualityModel
from .train import EnhanceTrainConfig, train_enhancer


class LowLightEnhancer(BaseEstimator, TransformerMixin):
    """Enhancer with an optional frozen quality prior.

    ``fit(X, y)`` takes low-light images as X and their references as y;
    ``transform`` enhances images (clamped to [0, 1]). ``quality_model``
    is either a loaded :class:`QualityModel` or a model path; it is only
    required when ``lambda_`` is positive.
    """

    def __init__(self, quality_model=None, lambda_=5e-3, epochs=200,
                 initial_lr=1e-4, lr_decay_factor=0.5, decay_epoch=None,
                 crop_size=256, batch_size=8, max_steps=None, seed=0):
        self.quality_model = quality_model
        self.lambda_ = lambda_
        self.epochs = epochs
        self.initial_lr = initial_lr
        self.lr_decay_factor = lr_decay_factor
        self.decay_epoch = decay_epoch
        self.crop_size = crop_size
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.seed = seed

    def _resolve_quality_model(self):
        if isinstance(self.quality_model, (str, bytes)) or hasattr(
                self.quality_model, "__fspath__"):
            return QualityModel.load(self.quality_model)
        return self.quality_model

    def fit(self, X, y):
        if len(X) != len(y):
            raise ValueError(f"X and y disagree: {len(X)} vs {len(y)}")
        quality = self._resolve_quality_model()
        if self.lambda_ > 0 and quality is None:
            raise ValueError("lambda_ > 0 requires a quality_model")
        config = EnhanceTrainConfig(
            lambda_=self.lambda_, epochs=self.epochs,
            initial_lr=self.initial_lr,
            lr_decay_factor=self.lr_decay_factor,
            decay_epoch=self.decay_epoch, crop_size=self.crop_size,
            batch_size=self.batch_size, max_steps=self.max_steps)
        self.model_ = train_enhancer(list(zip(X, y)), quality, config,
                                     seed=self.seed)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return [self.model_.enhance(im) for im in X]
