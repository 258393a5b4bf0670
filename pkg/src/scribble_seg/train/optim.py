"""Poly learning-rate schedule and momentum SGD with weight decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from scribble_seg.common.errors import NumericalError, ValidationError


def poly_lr(base_lr: float, iteration: int, max_iterations: int, power: float = 0.9) -> float:
    """``base_lr * (1 - iteration / max_iterations) ** power``."""
    if max_iterations <= 0:
        return base_lr
    if not 0 <= iteration <= max_iterations:
        raise ValidationError(f"iteration {iteration} outside [0, {max_iterations}]")
    return base_lr * (1.0 - iteration / max_iterations) ** power


@dataclass
class OptimState:
    """Momentum buffers (one per parameter) and the step counter."""

    velocity: dict[str, torch.Tensor] = field(default_factory=dict)
    iteration: int = 0

    @classmethod
    def zeros_like(cls, params: nn.Module) -> "OptimState":
        return cls(velocity={name: torch.zeros_like(p) for name, p in params.named_parameters()})


@torch.no_grad()
def sgd_step(
    params: nn.Module,
    grads: dict[str, torch.Tensor],
    state: OptimState,
    lr: float,
    momentum: float = 0.9,
    weight_decay: float = 1e-4,
) -> tuple[nn.Module, OptimState]:
    """One momentum SGD update, applied in place.

    ``g' = g + wd * w``; ``v = momentum * v + g'``; ``w = w - lr * v``.

    Raises:
        NumericalError: If a gradient is non-finite (names the tensor)
        ValidationError: If lr is negative or shapes disagree
    """
    if lr < 0:
        raise ValidationError(f"learning rate must be >= 0, got {lr}")

    for name, weight in params.named_parameters():
        grad = grads[name]
        if grad.shape != weight.shape:
            raise ValidationError(f"gradient for {name} has shape {tuple(grad.shape)}, expected {tuple(weight.shape)}")
        if not torch.isfinite(grad).all():
            raise NumericalError("non-finite gradient", iteration=state.iteration, tensor=name)

        velocity = state.velocity.get(name)
        if velocity is None:
            velocity = torch.zeros_like(weight)
        velocity = momentum * velocity + (grad + weight_decay * weight)
        state.velocity[name] = velocity
        weight.sub_(lr * velocity)

    state.iteration += 1
    return params, state
