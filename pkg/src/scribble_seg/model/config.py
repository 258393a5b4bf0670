"""Network configuration."""

from __future__ import annotations

from dataclasses import dataclass

from scribble_seg.common.config import dataclass_from_dict, dataclass_to_dict, stable_hash


@dataclass
class ModelConfig:
    """Shape of the dual-branch UNet.

    Channel width doubles per level starting from ``base_width``. Inputs must
    be divisible by ``2 ** (levels - 1)`` in both spatial dimensions.
    """

    in_channels: int = 1
    num_classes: int = 4
    levels: int = 5
    base_width: int = 16
    dropout_rate: float = 0.5

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be >= 1, got {self.base_width}")
        if self.in_channels < 1 or self.num_classes < 2:
            raise ValueError("need in_channels >= 1 and num_classes >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    @property
    def widths(self) -> list[int]:
        return [self.base_width * 2**level for level in range(self.levels)]

    @property
    def size_multiple(self) -> int:
        return 2 ** (self.levels - 1)

    @classmethod
    def from_dict(cls, data: dict | None) -> "ModelConfig":
        return dataclass_from_dict(cls, data, "model")

    @classmethod
    def desk_scale(cls) -> "ModelConfig":
        """Three-level, 8-channel network used for laptop-sized runs and tests."""
        return cls(levels=3, base_width=8)

    def to_dict(self) -> dict:
        return dataclass_to_dict(self)

    @property
    def digest(self) -> str:
        return stable_hash(self.to_dict())
