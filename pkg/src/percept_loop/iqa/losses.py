"""Regression loss on batch-normalized scores.

Predictions and targets are each centered and divided by their Euclidean
norm (plus a small epsilon), and the loss is the Euclidean distance
between the two normalized vectors. Positive affine changes of either
side therefore leave the loss unchanged up to the epsilon.
"""

from __future__ import annotations

import torch

EPS = 1e-8


def _normalize(v: torch.Tensor, eps: float) -> torch.Tensor:
    centered = v - v.mean()
    return centered / (centered.norm() + eps)


def norm_in_norm_loss(preds: torch.Tensor, targets: torch.Tensor,
                      eps: float = EPS) -> torch.Tensor:
    """Distance between normalized prediction and target vectors.

    Both arguments are 1-D tensors of equal length B >= 2; targets must
    not be constant. Returns a 0-dim tensor in [0, 2] (up to eps).
    """
    preds = preds.reshape(-1)
    targets = targets.reshape(-1)
    if preds.numel() != targets.numel():
        raise ValueError(
            f"length mismatch: {preds.numel()} vs {targets.numel()}")
    if preds.numel() < 2:
        raise ValueError(f"need at least 2 elements, got {preds.numel()}")
    if (targets == targets[0]).all():
        raise ValueError("targets are constant; the loss is undefined")
    return (_normalize(preds, eps) - _normalize(targets, eps)).norm()
