"""Quality-model training loop.

The regression loss is applied to the joint score and to the two
per-scale scores with the configured (identical by default) weights.
Training consumes seeded random crops; evaluation and the q_max ceiling
use full-size images.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..dataio import crop_patch
from ..validation import check_image, check_seed
from .config import MIN_INPUT_SIZE, QualityNetConfig
from .losses import norm_in_norm_loss
from .model import QualityModel
from .network import QualityNetwork, images_to_tensor, init_parameters


@dataclass
class QualityTrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-4
    crop_size: int = 224
    max_steps: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("epochs must be >= 1 and batch_size >= 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.crop_size < MIN_INPUT_SIZE:
            raise ValueError(
                f"crop_size must be at least {MIN_INPUT_SIZE}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive when set")


def training_loss(prediction, targets: torch.Tensor,
                  config: QualityNetConfig) -> torch.Tensor:
    """Weighted sum of the regression loss over joint and scale scores."""
    w_final, w_s1, w_s2 = config.aux_loss_weights
    loss = w_final * norm_in_norm_loss(prediction.score, targets)
    if config.use_multi_scale:
        loss = loss + w_s1 * norm_in_norm_loss(prediction.score_s1, targets)
    loss = loss + w_s2 * norm_in_norm_loss(prediction.score_s2, targets)
    return loss


def train_quality_model(items, config: QualityNetConfig,
                        train_cfg: QualityTrainConfig | None = None,
                        seed=0, train_split_digest: str = "") -> QualityModel:
    """Fit a quality network on (image, opinion score) pairs.

    Deterministic given the seed: initialization, shuffling, and crop
    offsets all derive from it. Raises on an empty or single-item set,
    on images smaller than the crop size, and on non-finite losses.
    """
    seed = check_seed(seed)
    train_cfg = train_cfg or QualityTrainConfig()
    items = [(check_image(im, f"train image {i}"), float(score))
             for i, (im, score) in enumerate(items)]
    if len(items) < 2:
        raise ValueError("need at least two training items")
    for i, (im, _) in enumerate(items):
        if im.shape[0] < train_cfg.crop_size or im.shape[1] < train_cfg.crop_size:
            raise ValueError(
                f"train image {i} is {im.shape[0]}x{im.shape[1]}, smaller "
                f"than crop_size {train_cfg.crop_size}")

    torch.manual_seed(seed)
    network = QualityNetwork(config)
    init_parameters(network, seed)
    network.train()
    optimizer = torch.optim.Adam(network.parameters(),
                                 lr=train_cfg.learning_rate)
    rng = np.random.default_rng(seed)
    targets_all = np.array([score for _, score in items])

    history: list[float] = []
    step = 0
    done = False
    for _epoch in range(train_cfg.epochs):
        if done:
            break
        order = rng.permutation(len(items))
        for start in range(0, len(order), train_cfg.batch_size):
            chunk = order[start:start + train_cfg.batch_size]
            if len(chunk) < 2:
                continue
            targets = torch.tensor(targets_all[chunk], dtype=torch.float32)
            if (targets == targets[0]).all():
                continue
            crops = [crop_patch(items[i][0], train_cfg.crop_size,
                                int(rng.integers(0, 2 ** 31)))
                     for i in chunk]
            prediction = network(images_to_tensor(crops))
            loss = training_loss(prediction, targets, config)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at step {step}: {loss.item()}"
                    f" (batch indices {chunk.tolist()})")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            history.append(float(loss.item()))
            step += 1
            if train_cfg.max_steps is not None and step >= train_cfg.max_steps:
                done = True
                break

    network.eval()
    _calibrate_heads(network, config, items, targets_all)
    with torch.no_grad():
        predictions = [float(network(images_to_tensor([im])).score[0])
                       for im, _ in items]
    q_max = float(max(predictions))
    return QualityModel(network=network, config=config, q_max=q_max,
                        train_split_digest=train_split_digest, seed=seed,
                        loss_history=history)


def _calibrate_heads(network: QualityNetwork, config: QualityNetConfig,
                     items, targets: np.ndarray) -> None:
    """Anchor each score head to the opinion-score scale.

    The regression loss is invariant to positive affine maps of the
    predictions, so the raw output scale is arbitrary; the quality-prior
    term used downstream (|q_max - score|) is not. Folding the affine
    map that matches the training targets' mean and spread into each
    head picks the scale-anchored representative of the same optimum.
    """
    with torch.no_grad():
        outs = [network(images_to_tensor([im])) for im, _ in items]
        per_head = {
            "head_final": np.array([float(o.score[0]) for o in outs]),
            "head_s2": np.array([float(o.score_s2[0]) for o in outs]),
        }
        if config.use_multi_scale:
            per_head["head_s1"] = np.array([float(o.score_s1[0])
                                            for o in outs])
        t_mean, t_std = float(targets.mean()), float(targets.std())
        for name, preds in per_head.items():
            head = getattr(network, name)
            p_std = float(preds.std())
            if p_std <= 0 or t_std <= 0:
                continue
            a = t_std / p_std
            b = t_mean - a * float(preds.mean())
            head.weight.mul_(a)
            head.bias.mul_(a)
            head.bias.add_(b)
