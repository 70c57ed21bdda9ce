"""Three-layer convolutional enhancer and its on-disk form.

Kernel sizes 9, 1, 5 over channel widths 3 -> 64 -> 32 -> 3 with
rectifiers after the first two layers; padding preserves the spatial
size. The raw network output is unclamped (training needs the
gradients); inference clamps to [0, 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..validation import check_image
from ..iqa.model import state_dict_blob
from ..iqa.network import images_to_tensor

ARCH_SRCNN_STYLE = "srcnn_style"
FORMAT_VERSION = 1


class EnhancerNetwork(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 64, 9, padding=4)
        self.conv2 = nn.Conv2d(64, 32, 1)
        self.conv3 = nn.Conv2d(32, 3, 5, padding=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(
                f"expected input of shape (B, 3, H, W), got {tuple(x.shape)}")
        x = F.relu(self.conv1(x))
        x = F.relu(self.conv2(x))
        return self.conv3(x)


@dataclass
class EnhancerModel:
    network: EnhancerNetwork
    lambda_: float
    seed: int
    config_digest: str
    arch: str = ARCH_SRCNN_STYLE
    loss_history: list = field(default_factory=list, repr=False, compare=False)

    def enhance(self, image) -> np.ndarray:
        """Enhance one image; output clamped to [0, 1]."""
        img = check_image(image)
        self.network.eval()
        dtype = next(self.network.parameters()).dtype
        with torch.no_grad():
            out = self.network(images_to_tensor([img], dtype=dtype))
        result = out[0].clamp(0.0, 1.0).permute(1, 2, 0).numpy()
        return result.astype(np.float32)

    def params_blob(self) -> bytes:
        return state_dict_blob(self.network)

    def save(self, path) -> Path:
        base = Path(path)
        if base.suffix in (".pt", ".json"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.network.state_dict(), base.with_suffix(".pt"))
        manifest = {
            "format_version": FORMAT_VERSION,
            "arch": self.arch,
            "lambda": self.lambda_,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }
        with open(base.with_suffix(".json"), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        return base

    @classmethod
    def load(cls, path) -> "EnhancerModel":
        base = Path(path)
        if base.suffix in (".pt", ".json"):
            base = base.with_suffix("")
        with open(base.with_suffix(".json"), "r", encoding="utf-8") as f:
            manifest = json.load(f)
        if manifest.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported enhancer format_version: "
                f"{manifest.get('format_version')!r}")
        if manifest.get("arch") != ARCH_SRCNN_STYLE:
            raise ValueError(f"unknown enhancer arch: {manifest.get('arch')!r}")
        network = EnhancerNetwork()
        state = torch.load(base.with_suffix(".pt"), map_location="cpu",
                           weights_only=True)
        network.load_state_dict(state)
        network.eval()
        return cls(network=network, lambda_=float(manifest["lambda"]),
                   seed=int(manifest["seed"]),
                   config_digest=manifest.get("config_digest", ""),
                   arch=manifest["arch"])
