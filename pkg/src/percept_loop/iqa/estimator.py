"""Scikit-learn style wrapper around the quality network."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .config import BackboneConfig, QualityNetConfig
from .train import QualityTrainConfig, train_quality_model


class QualityRegressor(BaseEstimator, RegressorMixin):
    """Blind quality regressor over RGB images in [0, 1].

    ``fit`` expects a list of H x W x 3 float arrays and one opinion
    score per image; ``predict`` scores images one at a time at native
    size. Defaults are sized for CPU-scale experiments; raise
    ``stage4_channels`` (stage 5 doubles it) for higher capacity.
    """

    def __init__(self, stage4_channels=64, groups=8, blocks_per_stage=1,
                 use_multi_scale=True, use_illumination=True,
                 use_content_adaptation=True,
                 pooling_mode="content_adaptive",
                 attention_hidden=(256, 64, 256),
                 encoder_units=(256, 128, 64), illum_hidden=64,
                 pretrained_weights_path=None,
                 epochs=100, batch_size=32, learning_rate=1e-4,
                 crop_size=224, max_steps=None, seed=0):
        self.stage4_channels = stage4_channels
        self.groups = groups
        self.blocks_per_stage = blocks_per_stage
        self.use_multi_scale = use_multi_scale
        self.use_illumination = use_illumination
        self.use_content_adaptation = use_content_adaptation
        self.pooling_mode = pooling_mode
        self.attention_hidden = attention_hidden
        self.encoder_units = encoder_units
        self.illum_hidden = illum_hidden
        self.pretrained_weights_path = pretrained_weights_path
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.crop_size = crop_size
        self.max_steps = max_steps
        self.seed = seed

    def _net_config(self) -> QualityNetConfig:
        return QualityNetConfig(
            backbone=BackboneConfig(
                stage4_channels=self.stage4_channels,
                stage5_channels=2 * self.stage4_channels,
                groups=self.groups,
                blocks_per_stage=self.blocks_per_stage,
                pretrained_weights_path=self.pretrained_weights_path),
            use_multi_scale=self.use_multi_scale,
            use_illumination=self.use_illumination,
            use_content_adaptation=self.use_content_adaptation,
            pooling_mode=self.pooling_mode,
            attention_hidden=tuple(self.attention_hidden),
            encoder_units=tuple(self.encoder_units),
            illum_hidden=self.illum_hidden)

    def _train_config(self) -> QualityTrainConfig:
        return QualityTrainConfig(epochs=self.epochs,
                                  batch_size=self.batch_size,
                                  learning_rate=self.learning_rate,
                                  crop_size=self.crop_size,
                                  max_steps=self.max_steps)

    def fit(self, X, y):
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) != len(y):
            raise ValueError(f"X and y disagree: {len(X)} vs {len(y)}")
        self.model_ = train_quality_model(
            list(zip(X, y)), self._net_config(), self._train_config(),
            seed=self.seed)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(X)
