"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

from scribble_seg.common.config import dataclass_from_dict, dataclass_to_dict
from scribble_seg.common.errors import ConfigError
from scribble_seg.data.config import AugmentConfig
from scribble_seg.losses.config import SUPERVISIONS, LossWeights

ALPHA_MODES = ("random", "fixed")
DECODERS = ("main", "aux")

# Validation runs this many times over a training run when val_every is 0
VALIDATIONS_PER_RUN = 20


@dataclass
class TrainConfig:
    """Optimization and supervision settings for one training run.

    Defaults are the desk-scale setting; the full-size values are batch 12,
    60000 iterations and 256x256 patches (see ``full_scale``).
    """

    base_lr: float = 0.03
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 4
    max_iterations: int = 2000
    lambda_pls: float = 0.5
    poly_power: float = 0.9
    supervision: str = "pls"
    alpha_mode: str = "random"
    alpha_fixed: float = 0.5
    seed: int = 0
    eval_decoder: str = "main"
    patch_size: tuple[int, int] = (64, 64)
    epsilon_dice: float = 1e-5
    dice_include_background: bool = True
    pls_criterion: str = "dice"
    val_every: int = 0
    threads: int = 1
    progress: bool = True
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if not self.base_lr > 0:
            raise ValueError(f"base_lr must be > 0, got {self.base_lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be >= 0, got {self.max_iterations}")
        if not self.poly_power > 0:
            raise ValueError(f"poly_power must be > 0, got {self.poly_power}")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("momentum and weight_decay must be >= 0")
        if self.supervision not in SUPERVISIONS:
            raise ValueError(f"supervision must be one of {SUPERVISIONS}, got {self.supervision!r}")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}")
        if self.alpha_mode == "fixed" and not 0.0 < self.alpha_fixed < 1.0:
            raise ValueError(f"alpha_fixed must lie in (0, 1), got {self.alpha_fixed}")
        if self.eval_decoder not in DECODERS:
            raise ValueError(f"eval_decoder must be one of {DECODERS}, got {self.eval_decoder!r}")
        if len(self.patch_size) != 2 or min(self.patch_size) < 1:
            raise ValueError(f"patch_size must be two positive ints, got {self.patch_size}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        # validated here so a bad loss setting fails at config time
        self.loss_weights()

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda_pls=self.lambda_pls,
            epsilon_dice=self.epsilon_dice,
            dice_include_background=self.dice_include_background,
            pls_criterion=self.pls_criterion,
        )

    @property
    def validation_interval(self) -> int:
        if self.val_every > 0:
            return self.val_every
        return max(1, self.max_iterations // VALIDATIONS_PER_RUN)

    @classmethod
    def from_dict(cls, data: dict | None) -> "TrainConfig":
        data = dict(data or {})
        augment = data.pop("augment", None)
        config = dataclass_from_dict(cls, data, "train")
        if augment is not None:
            if not isinstance(augment, dict):
                raise ConfigError("[train] augment must be a table/object")
            config.augment = AugmentConfig.from_dict(augment)
        return config

    @classmethod
    def full_scale(cls, **overrides) -> "TrainConfig":
        """Batch 12, 60k iterations, 256x256 inputs."""
        values = {"batch_size": 12, "max_iterations": 60000, "patch_size": (256, 256)}
        values.update(overrides)
        return cls(**values)

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)
