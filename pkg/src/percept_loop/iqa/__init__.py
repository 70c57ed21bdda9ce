"""Blind quality model for enhanced low-light images.

A small residual backbone yields feature maps at strides 16 and 32; a
max-over-RGB luminance branch is pooled to each scale and merged in;
channel attention derived from mean-pooled features reweights the
std-pooled features; per-scale encoders and a joint head regress the
quality score.
"""

from .config import BackboneConfig, QualityNetConfig, tiny_config
from .losses import norm_in_norm_loss
from .network import (
    FeatureBundle,
    QualityNetwork,
    QualityPrediction,
    max_rgb,
    pool_luminance,
)
from .model import QualityModel, split_digest
from .train import QualityTrainConfig, train_quality_model
from .estimator import QualityRegressor

__all__ = [
    "BackboneConfig", "QualityNetConfig", "tiny_config",
    "norm_in_norm_loss",
    "FeatureBundle", "QualityNetwork", "QualityPrediction",
    "max_rgb", "pool_luminance",
    "QualityModel", "split_digest",
    "QualityTrainConfig", "train_quality_model",
    "QualityRegressor",
]
