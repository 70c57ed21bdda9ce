"""Configuration records for the quality network."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

POOLING_MODES = ("content_adaptive", "std_only", "mean_only")

STAGE4_STRIDE = 16
STAGE5_STRIDE = 32
MIN_INPUT_SIZE = 32


@dataclass
class BackboneConfig:
    """Two-stage residual backbone with grouped convolutions.

    Stage-4 features sit at 1/16 of the input resolution, stage-5 at
    1/32 with twice the channels. ``pretrained_weights_path`` may point
    to a torch state dict saved for this architecture; loading is
    strict, so the channel configuration must match the checkpoint.
    """

    stage4_channels: int = 1024
    stage5_channels: int = 2048
    groups: int = 8
    blocks_per_stage: int = 1
    pretrained_weights_path: str | None = None

    def __post_init__(self):
        if self.stage4_channels < 2:
            raise ValueError("stage4_channels must be at least 2")
        if self.stage5_channels != 2 * self.stage4_channels:
            raise ValueError(
                f"stage5_channels must equal 2 * stage4_channels "
                f"({2 * self.stage4_channels}), got {self.stage5_channels}")
        if self.groups < 1 or self.blocks_per_stage < 1:
            raise ValueError("groups and blocks_per_stage must be positive")


@dataclass
class QualityNetConfig:
    """Full quality-network configuration including ablation toggles.

    ``pooling_mode`` must be "content_adaptive" exactly when
    ``use_content_adaptation`` is on; "std_only" and "mean_only" are the
    ablations that bypass the attention reweighting.
    """

    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    use_multi_scale: bool = True
    use_illumination: bool = True
    use_content_adaptation: bool = True
    pooling_mode: str = "content_adaptive"
    attention_hidden: tuple[int, int, int] = (256, 64, 256)
    encoder_units: tuple[int, int, int] = (256, 128, 64)
    illum_hidden: int = 64
    aux_loss_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    input_mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    input_std: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.pooling_mode not in POOLING_MODES:
            raise ValueError(
                f"pooling_mode must be one of {POOLING_MODES}, "
                f"got {self.pooling_mode!r}")
        if self.use_content_adaptation != (self.pooling_mode == "content_adaptive"):
            raise ValueError(
                "use_content_adaptation must match pooling_mode: "
                f"{self.use_content_adaptation} vs {self.pooling_mode!r}")
        if len(self.attention_hidden) != 3:
            raise ValueError("attention_hidden must list 3 unit counts")
        if len(self.encoder_units) != 3:
            raise ValueError("encoder_units must list 3 unit counts")
        if len(self.aux_loss_weights) != 3:
            raise ValueError("aux_loss_weights must list 3 weights")
        if self.illum_hidden < 1:
            raise ValueError("illum_hidden must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("attention_hidden", "encoder_units", "aux_loss_weights",
                    "input_mean", "input_std"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QualityNetConfig":
        d = dict(d)
        d["backbone"] = BackboneConfig(**d["backbone"])
        for key in ("attention_hidden", "encoder_units", "aux_loss_weights",
                    "input_mean", "input_std"):
            d[key] = tuple(d[key])
        return cls(**d)


def tiny_config(stage4_channels: int = 8, **overrides) -> QualityNetConfig:
    """Desk-scale configuration small enough for finite-difference checks."""
    defaults = dict(
        backbone=BackboneConfig(stage4_channels=stage4_channels,
                                stage5_channels=2 * stage4_channels,
                                groups=2),
        attention_hidden=(4, 2, 4),
        encoder_units=(8, 8, 8),
        illum_hidden=4,
    )
    defaults.update(overrides)
    return QualityNetConfig(**defaults)
