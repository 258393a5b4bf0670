"""Dual-branch UNet: one shared encoder, a main decoder and a dropout-perturbed auxiliary decoder."""

from __future__ import annotations

import math
from collections.abc import Callable
from typing import Literal

import torch
import torch.nn as nn
import torch.nn.functional as F

from scribble_seg.common.errors import NumericalError, ValidationError
from scribble_seg.model.config import ModelConfig

Mode = Literal["train", "eval"]


def _groups(channels: int) -> int:
    return math.gcd(channels, 4)


class ConvBlock(nn.Module):
    """Two conv3x3 + GroupNorm + ReLU layers."""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1)
        self.norm1 = nn.GroupNorm(_groups(out_channels), out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, kernel_size=3, padding=1)
        self.norm2 = nn.GroupNorm(_groups(out_channels), out_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.norm1(self.conv1(x)))
        return F.relu(self.norm2(self.conv2(x)))


class Encoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        widths = config.widths
        self.blocks = nn.ModuleList([ConvBlock(config.in_channels, widths[0])])
        for level in range(1, config.levels):
            self.blocks.append(ConvBlock(widths[level - 1], widths[level]))

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        features = []
        for level, block in enumerate(self.blocks):
            if level > 0:
                x = F.max_pool2d(x, kernel_size=2)
            x = block(x)
            features.append(x)
        return features


class Decoder(nn.Module):
    """UNet decoder: transposed-conv upsampling, skip concatenation, conv blocks, 1x1 head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        widths = config.widths
        self.up = nn.ModuleList()
        self.blocks = nn.ModuleList()
        for level in range(config.levels - 1, 0, -1):
            self.up.append(nn.ConvTranspose2d(widths[level], widths[level - 1], kernel_size=2, stride=2))
            self.blocks.append(ConvBlock(2 * widths[level - 1], widths[level - 1]))
        self.head = nn.Conv2d(widths[0], config.num_classes, kernel_size=1)

    def forward(
        self,
        features: list[torch.Tensor],
        dropout: Callable[[torch.Tensor], torch.Tensor] | None = None,
    ) -> torch.Tensor:
        x = features[-1]
        for up, block, skip in zip(self.up, self.blocks, reversed(features[:-1])):
            x = torch.cat([skip, up(x)], dim=1)
            if dropout is not None:
                x = dropout(x)
            x = block(x)
        return self.head(x)


class DualBranchUNet(nn.Module):
    """Shared encoder with two structurally identical, independently initialized decoders."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.decoder_main = Decoder(config)
        self.decoder_aux = Decoder(config)

    def check_input(self, batch: torch.Tensor) -> None:
        if batch.ndim != 4 or batch.shape[1] != self.config.in_channels:
            raise ValidationError(
                f"expected input [B, {self.config.in_channels}, H, W], got {tuple(batch.shape)}"
            )
        m = self.config.size_multiple
        if batch.shape[2] % m or batch.shape[3] % m:
            raise ValidationError(f"H and W must be divisible by {m}, got {tuple(batch.shape[2:])}")
        if not torch.isfinite(batch).all():
            raise ValidationError("input batch contains non-finite values")

    def logits(
        self,
        batch: torch.Tensor,
        mode: Mode = "eval",
        rng: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Run the encoder once and both decoders; return raw logits ``(z1, z2)``."""
        self.check_input(batch)
        features = self.encoder(batch)
        z1 = self.decoder_main(features)

        rate = self.config.dropout_rate
        dropout = None
        if mode == "train" and rate > 0:

            def dropout(x: torch.Tensor) -> torch.Tensor:
                keep = torch.rand(x.shape, generator=rng, dtype=x.dtype, device=x.device) >= rate
                return x * keep / (1.0 - rate)

        z2 = self.decoder_aux(features, dropout=dropout)
        return z1, z2

    def forward(
        self,
        batch: torch.Tensor,
        mode: Mode = "eval",
        rng: torch.Generator | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        z1, z2 = self.logits(batch, mode=mode, rng=rng)
        return torch.softmax(z1, dim=1), torch.softmax(z2, dim=1)


def _fan_in(module: nn.Module) -> int:
    weight = module.weight
    receptive = weight[0, 0].numel()
    if isinstance(module, nn.ConvTranspose2d):
        return weight.shape[0] * receptive
    return weight.shape[1] * receptive


def init_bound(module: nn.Module) -> float:
    """Uniform init bound ``sqrt(6 / fan_in)`` (He-uniform for ReLU networks)."""
    return math.sqrt(6.0 / _fan_in(module))


def init_params(config: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> DualBranchUNet:
    """Build a DualBranchUNet with seeded He-uniform weights and zero biases.

    Parameters are drawn from one generator in registration order, so the two
    decoders get different values and the same seed gives identical weights.
    """
    model = DualBranchUNet(config).to(dtype)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
                bound = init_bound(module)
                module.weight.uniform_(-bound, bound, generator=generator)
                module.bias.zero_()
            elif isinstance(module, nn.GroupNorm):
                module.weight.fill_(1.0)
                module.bias.zero_()
    return model


def forward(
    params: DualBranchUNet,
    batch: torch.Tensor,
    mode: Mode = "eval",
    rng: torch.Generator | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Predict per-pixel class probabilities from both decoders.

    Args:
        params: The network
        batch: Input images ``[B, in_channels, H, W]``
        mode: ``"train"`` enables dropout in the auxiliary decoder
        rng: Generator for the dropout masks (train mode only)

    Returns:
        ``(y1, y2)``, each ``[B, C, H, W]`` and summing to one over C

    Raises:
        ValidationError: If the batch shape is not compatible with the network
    """
    return params(batch, mode=mode, rng=rng)


def backward(
    params: DualBranchUNet,
    loss: torch.Tensor,
    iteration: int | None = None,
) -> dict[str, torch.Tensor]:
    """Gradients of ``loss`` for every named parameter.

    Parameters the loss does not depend on get a zero gradient.

    Raises:
        NumericalError: If the loss is not finite
    """
    if not torch.isfinite(loss).all():
        raise NumericalError(f"non-finite loss {loss.item()}", iteration=iteration)

    named = list(params.named_parameters())
    if not loss.requires_grad:
        return {name: torch.zeros_like(p) for name, p in named}

    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    return {
        name: (g if g is not None else torch.zeros_like(p)).detach()
        for (name, p), g in zip(named, grads)
    }


def parameter_groups(params: DualBranchUNet) -> dict[str, list[str]]:
    """Parameter names per component: ``encoder``, ``decoder_main``, ``decoder_aux``."""
    groups: dict[str, list[str]] = {"encoder": [], "decoder_main": [], "decoder_aux": []}
    for name, _ in params.named_parameters():
        groups[name.split(".", 1)[0]].append(name)
    return groups
