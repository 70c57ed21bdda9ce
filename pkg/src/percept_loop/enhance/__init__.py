"""Quality-guided enhancement: a three-layer convolutional enhancer
trained on a structural fidelity term plus a frozen-quality-model prior."""

from .network import EnhancerNetwork, EnhancerModel
from .losses import (
    ssim_tensor,
    fidelity_loss,
    fidelity_loss_tensor,
    quality_loss,
    quality_loss_tensor,
    combined_loss,
    combined_loss_tensor,
)
from .train import EnhanceTrainConfig, train_enhancer
from .estimator import LowLightEnhancer

__all__ = [
    "EnhancerNetwork", "EnhancerModel",
    "ssim_tensor", "fidelity_loss", "fidelity_loss_tensor",
    "quality_loss", "quality_loss_tensor",
    "combined_loss", "combined_loss_tensor",
    "EnhanceTrainConfig", "train_enhancer",
    "LowLightEnhancer",
]
