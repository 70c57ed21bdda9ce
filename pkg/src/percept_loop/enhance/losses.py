"""Enhancement training losses.

The fidelity term is 1 minus a differentiable SSIM that mirrors the
reference implementation in :mod:`percept_loop.metrics` (11x11 Gaussian
window, sigma 1.5, valid windows, per-channel average). The quality
term is the absolute distance between a frozen quality model's score
and its training-set ceiling ``q_max``; the combined loss adds the two
with weight ``lambda``.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from ..metrics import SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW, gaussian_window
from ..validation import check_image, check_same_shape
from ..iqa.network import images_to_tensor


def _window(dtype, device) -> torch.Tensor:
    w = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    return torch.from_numpy(w).to(dtype=dtype, device=device)[None, None]


def ssim_tensor(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Differentiable per-image SSIM for (B, 3, H, W) tensors in [0, 1]."""
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.shape[-2] < SSIM_WINDOW or x.shape[-1] < SSIM_WINDOW:
        raise ValueError(
            f"inputs must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM")
    channels = x.shape[1]
    window = _window(x.dtype, x.device).expand(channels, 1, -1, -1)
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2

    def filt(t):
        return F.conv2d(t, window, groups=channels)

    mu_x = filt(x)
    mu_y = filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return (num / den).mean(dim=(1, 2, 3))


def fidelity_loss_tensor(enhanced: torch.Tensor,
                         reference: torch.Tensor) -> torch.Tensor:
    """Per-image 1 - SSIM, averaged over the batch."""
    return (1.0 - ssim_tensor(enhanced, reference)).mean()


def quality_loss_tensor(enhanced: torch.Tensor, quality_model) -> torch.Tensor:
    """Mean |q_max - score| over the batch; quality weights stay frozen.

    Gradients flow through the enhanced images only; the caller is
    responsible for having disabled gradients on the model parameters.
    """
    qdtype = next(quality_model.network.parameters()).dtype
    prediction = quality_model.network(enhanced.to(qdtype))
    q_max = torch.as_tensor(quality_model.q_max, dtype=qdtype)
    return (q_max - prediction.score).abs().mean().to(enhanced.dtype)


def combined_loss_tensor(enhanced: torch.Tensor, reference: torch.Tensor,
                         quality_model, lambda_: float) -> torch.Tensor:
    loss = fidelity_loss_tensor(enhanced, reference)
    if lambda_ != 0.0:
        loss = loss + lambda_ * quality_loss_tensor(enhanced, quality_model)
    return loss


# ---------------------------------------------------------------------
# Numpy-facing single-image forms
# ---------------------------------------------------------------------

def fidelity_loss(enhanced, reference) -> float:
    e = check_image(enhanced, "enhanced")
    r = check_image(reference, "reference")
    check_same_shape(e, r)
    with torch.no_grad():
        value = fidelity_loss_tensor(
            images_to_tensor([e], dtype=torch.float64),
            images_to_tensor([r], dtype=torch.float64))
    return float(value)


def quality_loss(enhanced, quality_model) -> float:
    if quality_model.q_max is None or not np.isfinite(quality_model.q_max):
        raise ValueError("quality model is missing a finite q_max")
    return float(abs(quality_model.q_max
                     - quality_model.predict_one(enhanced)))


def combined_loss(low, reference, enhancer_model, quality_model,
                  lambda_: float) -> float:
    """Loss of the enhancer's raw (unclamped) output on one image pair."""
    low_img = check_image(low, "low")
    ref = check_image(reference, "reference")
    check_same_shape(low_img, ref)
    if lambda_ < 0:
        raise ValueError(f"lambda must be non-negative, got {lambda_}")
    network = enhancer_model.network
    network.eval()
    dtype = next(network.parameters()).dtype
    with torch.no_grad():
        enhanced = network(images_to_tensor([low_img], dtype=dtype))
        value = combined_loss_tensor(
            enhanced, images_to_tensor([ref], dtype=dtype),
            quality_model, lambda_)
    return float(value)
