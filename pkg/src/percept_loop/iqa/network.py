"""Torch modules for the quality network.

The public numpy helpers (:func:`max_rgb`, :func:`pool_luminance`,
:func:`merge_features`) mirror the tensor operations used inside the
network so their contracts can be tested in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..validation import check_image
from .config import MIN_INPUT_SIZE, BackboneConfig, QualityNetConfig

STD_EPS = 1e-8


class QualityPrediction(NamedTuple):
    score: object
    score_s1: object
    score_s2: object


@dataclass
class FeatureBundle:
    """Per-scale feature maps and their pooled channel statistics."""

    s1: torch.Tensor
    s2: torch.Tensor
    f_s1_mean: torch.Tensor
    f_s1_std: torch.Tensor
    f_s2_mean: torch.Tensor
    f_s2_std: torch.Tensor


# ---------------------------------------------------------------------
# Numpy-facing primitives
# ---------------------------------------------------------------------

def max_rgb(image) -> np.ndarray:
    """Per-pixel maximum over the R, G, B channels."""
    img = check_image(image)
    return img.max(axis=2)


def pool_luminance(lum, target_h: int, target_w: int) -> np.ndarray:
    """Max-pool a luminance map to an exact target spatial size."""
    arr = np.asarray(lum, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"luminance map must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    if not (1 <= target_h <= h and 1 <= target_w <= w):
        raise ValueError(
            f"cannot pool {h}x{w} map to {target_h}x{target_w}")
    with torch.no_grad():
        pooled = F.adaptive_max_pool2d(
            torch.from_numpy(arr)[None, None], (target_h, target_w))
    return pooled[0, 0].numpy()


def merge_features(backbone_feats, illum_feats):
    """Element-wise sum of backbone and illumination feature maps."""
    if tuple(backbone_feats.shape) != tuple(illum_feats.shape):
        raise ValueError(
            f"shape mismatch: {tuple(backbone_feats.shape)} vs "
            f"{tuple(illum_feats.shape)}")
    return backbone_feats + illum_feats


def pooled_statistics(feature_map: torch.Tensor):
    """Per-channel spatial mean and population std (eps-stabilized)."""
    mean = feature_map.mean(dim=(2, 3))
    var = feature_map.var(dim=(2, 3), unbiased=False)
    std = torch.sqrt(var + STD_EPS)
    return mean, std


# ---------------------------------------------------------------------
# Modules
# ---------------------------------------------------------------------

def _grouped(channels: int, groups: int) -> int:
    return math.gcd(channels, groups)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int, groups: int):
        super().__init__()
        g = _grouped(channels, groups)
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, groups=g)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, groups=g)

    def forward(self, x):
        return F.relu(x + self.conv2(F.relu(self.conv1(x))))


def _downsample(c_in: int, c_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Conv2d(c_in, c_out, 3, stride=2, padding=1),
                         nn.ReLU())


class Backbone(nn.Module):
    """Residual convolutional trunk with outputs at strides 16 and 32."""

    def __init__(self, cfg: BackboneConfig):
        super().__init__()
        c4, c5 = cfg.stage4_channels, cfg.stage5_channels
        c1 = max(c4 // 16, 4)
        c2 = max(c4 // 8, 4)
        c3 = max(c4 // 4, 4)
        self.stem = nn.Sequential(
            nn.Conv2d(3, c1, 3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.ReLU())
        blocks = cfg.blocks_per_stage
        self.stage3 = nn.Sequential(
            _downsample(c2, c3),
            *[ResidualBlock(c3, cfg.groups) for _ in range(blocks)])
        self.stage4 = nn.Sequential(
            _downsample(c3, c4),
            *[ResidualBlock(c4, cfg.groups) for _ in range(blocks)])
        self.stage5 = nn.Sequential(
            _downsample(c4, c5),
            *[ResidualBlock(c5, cfg.groups) for _ in range(blocks)])

    def forward(self, x):
        x = self.stem(x)
        x = self.stage3(x)
        s1 = self.stage4(x)
        s2 = self.stage5(s1)
        return s1, s2


class IlluminationBranch(nn.Module):
    """Three 3x3 stride-1 convolutions over a pooled luminance map."""

    def __init__(self, out_channels: int, hidden: int):
        super().__init__()
        self.conv1 = nn.Conv2d(1, hidden, 3, padding=1)
        self.conv2 = nn.Conv2d(hidden, hidden, 3, padding=1)
        self.conv3 = nn.Conv2d(hidden, out_channels, 3, padding=1)

    def forward(self, pooled_lum):
        x = F.relu(self.conv1(pooled_lum))
        x = F.relu(self.conv2(x))
        return self.conv3(x)


class ContentAttention(nn.Module):
    """Channel attention from mean-pooled features: 4 affine layers,
    rectified except for the final logistic."""

    def __init__(self, channels: int, hidden: tuple[int, int, int]):
        super().__init__()
        h1, h2, h3 = hidden
        self.fc1 = nn.Linear(channels, h1)
        self.fc2 = nn.Linear(h1, h2)
        self.fc3 = nn.Linear(h2, h3)
        self.fc4 = nn.Linear(h3, channels)

    def forward(self, mean_vec):
        x = F.relu(self.fc1(mean_vec))
        x = F.relu(self.fc2(x))
        x = F.relu(self.fc3(x))
        return torch.sigmoid(self.fc4(x))


class ScaleEncoder(nn.Module):
    """Three affine+rectifier layers encoding one scale's pooled vector."""

    def __init__(self, channels: int, units: tuple[int, int, int]):
        super().__init__()
        u1, u2, u3 = units
        self.fc1 = nn.Linear(channels, u1)
        self.fc2 = nn.Linear(u1, u2)
        self.fc3 = nn.Linear(u2, u3)
        self.out_features = u3

    def forward(self, v):
        x = F.relu(self.fc1(v))
        x = F.relu(self.fc2(x))
        return F.relu(self.fc3(x))


class QualityNetwork(nn.Module):
    """Full quality model; forward returns (score, score_s1, score_s2).

    Inputs are raw [0, 1] RGB tensors (B, 3, H, W) with H, W >= 32; the
    luminance path reads the raw values while the backbone consumes the
    channel-standardized version. Without multi-scale features only the
    stage-5 path exists and score_s1 aliases score_s2.
    """

    def __init__(self, config: QualityNetConfig):
        super().__init__()
        self.config = config
        self.backbone = Backbone(config.backbone)
        c4 = config.backbone.stage4_channels
        c5 = config.backbone.stage5_channels
        if config.use_illumination:
            if config.use_multi_scale:
                self.illum_s1 = IlluminationBranch(c4, config.illum_hidden)
            self.illum_s2 = IlluminationBranch(c5, config.illum_hidden)
        if config.use_content_adaptation:
            if config.use_multi_scale:
                self.attention_s1 = ContentAttention(c4, config.attention_hidden)
            self.attention_s2 = ContentAttention(c5, config.attention_hidden)
        if config.use_multi_scale:
            self.encoder_s1 = ScaleEncoder(c4, config.encoder_units)
            self.head_s1 = nn.Linear(self.encoder_s1.out_features, 1)
        self.encoder_s2 = ScaleEncoder(c5, config.encoder_units)
        self.head_s2 = nn.Linear(self.encoder_s2.out_features, 1)
        joint = self.encoder_s2.out_features * (2 if config.use_multi_scale else 1)
        self.head_final = nn.Linear(joint, 1)

        mean = torch.tensor(config.input_mean).view(1, 3, 1, 1)
        std = torch.tensor(config.input_std).view(1, 3, 1, 1)
        self.register_buffer("input_mean", mean)
        self.register_buffer("input_std", std)

        if config.backbone.pretrained_weights_path:
            self._load_backbone_weights(config.backbone.pretrained_weights_path)

    def _load_backbone_weights(self, path: str) -> None:
        try:
            state = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise ValueError(f"cannot read backbone weights {path!r}: {exc}")
        try:
            self.backbone.load_state_dict(state)
        except RuntimeError as exc:
            raise ValueError(
                f"backbone weights {path!r} do not match the configured "
                f"architecture: {exc}")

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(
                f"expected input of shape (B, 3, H, W), got {tuple(x.shape)}")
        if x.shape[2] < MIN_INPUT_SIZE or x.shape[3] < MIN_INPUT_SIZE:
            raise ValueError(
                f"input {x.shape[2]}x{x.shape[3]} below the minimum size "
                f"{MIN_INPUT_SIZE}")

    def merged_maps(self, x: torch.Tensor):
        """Backbone maps with the illumination branch merged per scale."""
        self._check_input(x)
        normalized = (x - self.input_mean) / self.input_std
        s1, s2 = self.backbone(normalized)
        if self.config.use_illumination:
            lum = x.amax(dim=1, keepdim=True)
            if self.config.use_multi_scale:
                pooled1 = F.adaptive_max_pool2d(lum, s1.shape[-2:])
                s1 = merge_features(s1, self.illum_s1(pooled1))
            pooled2 = F.adaptive_max_pool2d(lum, s2.shape[-2:])
            s2 = merge_features(s2, self.illum_s2(pooled2))
        return s1, s2

    def feature_bundle(self, x: torch.Tensor) -> FeatureBundle:
        s1, s2 = self.merged_maps(x)
        m1, d1 = pooled_statistics(s1)
        m2, d2 = pooled_statistics(s2)
        return FeatureBundle(s1=s1, s2=s2, f_s1_mean=m1, f_s1_std=d1,
                             f_s2_mean=m2, f_s2_std=d2)

    def _scale_vector(self, mean, std, attention):
        mode = self.config.pooling_mode
        if mode == "content_adaptive":
            return attention(mean) * std
        if mode == "std_only":
            return std
        return mean

    def forward(self, x: torch.Tensor) -> QualityPrediction:
        bundle = self.feature_bundle(x)
        if self.config.use_multi_scale:
            v1 = self._scale_vector(
                bundle.f_s1_mean, bundle.f_s1_std,
                getattr(self, "attention_s1", None))
            e1 = self.encoder_s1(v1)
        v2 = self._scale_vector(
            bundle.f_s2_mean, bundle.f_s2_std,
            getattr(self, "attention_s2", None))
        e2 = self.encoder_s2(v2)
        score_s2 = self.head_s2(e2).squeeze(-1)
        if self.config.use_multi_scale:
            score_s1 = self.head_s1(e1).squeeze(-1)
            score = self.head_final(torch.cat([e1, e2], dim=1)).squeeze(-1)
        else:
            score_s1 = score_s2
            score = self.head_final(e2).squeeze(-1)
        return QualityPrediction(score=score, score_s1=score_s1,
                                 score_s2=score_s2)


def init_parameters(module: nn.Module, seed: int) -> None:
    """Fan-in scaled uniform weights, zero biases, fixed by seed."""
    gen = torch.Generator().manual_seed(int(seed))
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = (m.in_channels // m.groups) * m.kernel_size[0] * m.kernel_size[1]
        elif isinstance(m, nn.Linear):
            fan_in = m.in_features
        else:
            continue
        bound = 1.0 / math.sqrt(fan_in)
        with torch.no_grad():
            # Draw in float32 on CPU for reproducibility, then cast.
            w = torch.empty(m.weight.shape, dtype=torch.float32)
            w.uniform_(-bound, bound, generator=gen)
            m.weight.copy_(w)
            if m.bias is not None:
                m.bias.zero_()


def images_to_tensor(images, dtype=torch.float32) -> torch.Tensor:
    """Stack equal-size H x W x 3 images into a (B, 3, H, W) tensor."""
    arrays = [check_image(im) for im in images]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"images in one batch must share a shape, got {shapes}")
    batch = np.stack(arrays).transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(batch)).to(dtype)
