"""Serializable trained quality model.

A model on disk is two files sharing a stem: ``<stem>.pt`` holds the
parameter state dict, ``<stem>.json`` is the sidecar manifest with the
configuration, the training-set score ceiling ``q_max``, the seed, and
the split digest.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..validation import check_image
from .config import QualityNetConfig
from .network import QualityNetwork, QualityPrediction, images_to_tensor

FORMAT_VERSION = 1


def split_digest(split) -> str:
    """Stable digest of a train/test content split."""
    payload = json.dumps({
        "train": sorted(split.train_content_ids),
        "test": sorted(split.test_content_ids),
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def state_dict_blob(module: torch.nn.Module) -> bytes:
    """Canonical bytes of all parameters and buffers (sorted by name)."""
    out = io.BytesIO()
    for name, tensor in sorted(module.state_dict().items()):
        out.write(name.encode("utf-8"))
        out.write(str(tensor.dtype).encode("utf-8"))
        out.write(np.asarray(tensor.detach().cpu().numpy()).tobytes())
    return out.getvalue()


@dataclass
class QualityModel:
    network: QualityNetwork
    config: QualityNetConfig
    q_max: float
    train_split_digest: str = ""
    seed: int = 0
    loss_history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.q_max):
            raise ValueError(f"q_max must be finite, got {self.q_max}")

    # -- inference -----------------------------------------------------

    def predict_components(self, image) -> QualityPrediction:
        """Score one image at native size."""
        img = check_image(image)
        self.network.eval()
        dtype = next(self.network.parameters()).dtype
        with torch.no_grad():
            out = self.network(images_to_tensor([img], dtype=dtype))
        return QualityPrediction(score=float(out.score[0]),
                                 score_s1=float(out.score_s1[0]),
                                 score_s2=float(out.score_s2[0]))

    def predict_one(self, image) -> float:
        return self.predict_components(image).score

    def predict(self, images) -> np.ndarray:
        return np.array([self.predict_one(im) for im in images])

    # -- persistence ---------------------------------------------------

    def params_blob(self) -> bytes:
        return state_dict_blob(self.network)

    def save(self, path) -> Path:
        base = Path(path)
        if base.suffix in (".pt", ".json"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.network.state_dict(), base.with_suffix(".pt"))
        sidecar = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "q_max": self.q_max,
            "seed": self.seed,
            "train_split_digest": self.train_split_digest,
        }
        with open(base.with_suffix(".json"), "w", encoding="utf-8") as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)
            f.write("\n")
        return base

    @classmethod
    def load(cls, path) -> "QualityModel":
        base = Path(path)
        if base.suffix in (".pt", ".json"):
            base = base.with_suffix("")
        with open(base.with_suffix(".json"), "r", encoding="utf-8") as f:
            sidecar = json.load(f)
        if sidecar.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported model format_version: "
                f"{sidecar.get('format_version')!r}")
        config = QualityNetConfig.from_dict(sidecar["config"])
        network = QualityNetwork(config)
        state = torch.load(base.with_suffix(".pt"), map_location="cpu",
                           weights_only=True)
        network.load_state_dict(state)
        network.eval()
        return cls(network=network, config=config,
                   q_max=float(sidecar["q_max"]),
                   train_split_digest=sidecar.get("train_split_digest", ""),
                   seed=int(sidecar.get("seed", 0)))
