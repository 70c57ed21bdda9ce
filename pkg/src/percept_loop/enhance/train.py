"""Enhancer training against a frozen quality model.

Adaptive-moment descent on fidelity + lambda * quality over seeded
random paired crops. The learning rate is multiplied once by the decay
factor at the decay epoch (default: halfway).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

import numpy as np
import torch

from ..dataio import patch_offset
from ..validation import check_image, check_same_shape, check_seed
from ..iqa.config import MIN_INPUT_SIZE
from ..iqa.network import images_to_tensor, init_parameters
from .losses import combined_loss_tensor
from .network import EnhancerModel, EnhancerNetwork


@dataclass
class EnhanceTrainConfig:
    lambda_: float = 5e-3
    epochs: int = 200
    initial_lr: float = 1e-4
    lr_decay_factor: float = 0.5
    decay_epoch: int | None = None
    crop_size: int = 256
    batch_size: int = 8
    max_steps: int | None = None

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.initial_lr <= 0:
            raise ValueError("initial_lr must be positive")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must lie in (0, 1]")
        if self.decay_epoch is None:
            self.decay_epoch = max(1, self.epochs // 2)
        if self.decay_epoch > self.epochs:
            raise ValueError("decay_epoch must not exceed epochs")
        if self.crop_size < max(MIN_INPUT_SIZE, 11):
            raise ValueError(
                f"crop_size must be at least {MIN_INPUT_SIZE}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def train_enhancer(pairs, quality_model, config: EnhanceTrainConfig,
                   seed=0) -> EnhancerModel:
    """Fit the enhancer on (low, reference) image pairs.

    The quality model's parameters are frozen for the duration; crops
    are taken at identical offsets from both sides of a pair.
    """
    seed = check_seed(seed)
    if not pairs:
        raise ValueError("no training pairs supplied")
    validated = []
    for i, (low, ref) in enumerate(pairs):
        low = check_image(low, f"low image {i}")
        ref = check_image(ref, f"reference image {i}")
        check_same_shape(low, ref, f"pair {i}")
        if low.shape[0] < config.crop_size or low.shape[1] < config.crop_size:
            raise ValueError(
                f"pair {i} is {low.shape[0]}x{low.shape[1]}, smaller than "
                f"crop_size {config.crop_size}")
        validated.append((low, ref))

    if quality_model is None and config.lambda_ > 0:
        raise ValueError("a quality model is required when lambda > 0")
    frozen = (list(quality_model.network.parameters())
              if quality_model is not None else [])
    frozen_state = [bool(p.requires_grad) for p in frozen]
    for p in frozen:
        p.requires_grad_(False)
    if quality_model is not None:
        quality_model.network.eval()

    torch.manual_seed(seed)
    network = EnhancerNetwork()
    init_parameters(network, seed)
    network.train()
    optimizer = torch.optim.Adam(network.parameters(), lr=config.initial_lr)
    rng = np.random.default_rng(seed)

    history: list[float] = []
    step = 0
    done = False
    try:
        for epoch in range(config.epochs):
            if done:
                break
            if epoch == config.decay_epoch:
                for group in optimizer.param_groups:
                    group["lr"] = config.initial_lr * config.lr_decay_factor
            order = rng.permutation(len(validated))
            for start in range(0, len(order), config.batch_size):
                chunk = order[start:start + config.batch_size]
                lows, refs = [], []
                for i in chunk:
                    low, ref = validated[i]
                    top, left = patch_offset(low.shape[0], low.shape[1],
                                             config.crop_size,
                                             int(rng.integers(0, 2 ** 31)))
                    sl = (slice(top, top + config.crop_size),
                          slice(left, left + config.crop_size))
                    lows.append(low[sl])
                    refs.append(ref[sl])
                enhanced = network(images_to_tensor(lows))
                loss = combined_loss_tensor(enhanced, images_to_tensor(refs),
                                            quality_model, config.lambda_)
                if not torch.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite enhancer loss at step {step} "
                        f"(epoch {epoch}, batch {chunk.tolist()})")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                history.append(float(loss.item()))
                step += 1
                if config.max_steps is not None and step >= config.max_steps:
                    done = True
                    break
    finally:
        for p, was in zip(frozen, frozen_state):
            p.requires_grad_(was)

    network.eval()
    return EnhancerModel(network=network, lambda_=config.lambda_, seed=seed,
                         config_digest=config.digest(), loss_history=history)
