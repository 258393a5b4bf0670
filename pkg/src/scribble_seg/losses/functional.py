"""Supervision signals for the dual-branch network.

All losses take per-pixel probabilities ``[B, C, H, W]`` (softmax outputs)
and return scalar tensors that autograd can differentiate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import UNLABELED
from scribble_seg.losses.config import PROB_FLOOR, SUPERVISIONS, LossWeights


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValidationError(f"prediction shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def _check_target(y: torch.Tensor, labels: torch.Tensor) -> None:
    if y.ndim != 4 or labels.shape != (y.shape[0],) + tuple(y.shape[2:]):
        raise ValidationError(f"labels {tuple(labels.shape)} do not match prediction {tuple(y.shape)}")


def partial_cross_entropy(y: torch.Tensor, scribble: torch.Tensor) -> torch.Tensor:
    """Cross-entropy averaged over annotated pixels only.

    Args:
        y: Probabilities ``[B, C, H, W]``
        scribble: Integer labels ``[B, H, W]``; UNLABELED pixels are ignored

    Returns:
        Mean of ``-log y[s_i]`` over annotated pixels, or 0 if none are annotated

    Raises:
        ValidationError: If a label is neither a class id nor UNLABELED
    """
    _check_target(y, scribble)
    num_classes = y.shape[1]
    labeled = scribble != UNLABELED
    bad = labeled & ((scribble < 0) | (scribble >= num_classes))
    if bad.any():
        raise ValidationError(f"scribble label(s) {sorted(set(scribble[bad].tolist()))} invalid for {num_classes} classes")

    if not labeled.any():
        return (y * 0.0).sum()

    index = torch.where(labeled, scribble, torch.zeros_like(scribble)).long().unsqueeze(1)
    picked = y.gather(1, index).squeeze(1)[labeled]
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()


def one_hot(labels: torch.Tensor, num_classes: int, dtype: torch.dtype) -> torch.Tensor:
    """``[B, H, W]`` class ids to ``[B, C, H, W]`` one-hot."""
    return F.one_hot(labels.long(), num_classes).permute(0, 3, 1, 2).to(dtype)


def dice_loss(
    y: torch.Tensor,
    target: torch.Tensor,
    epsilon: float = 1e-5,
    include_background: bool = True,
) -> torch.Tensor:
    """Soft Dice loss against a hard label map, averaged over classes.

    Per class ``1 - (2 sum(y t) + eps) / (sum(y) + sum(t) + eps)`` with sums over
    the whole batch; a class absent from both prediction and target contributes 0.
    """
    _check_target(y, target)
    t = one_hot(target, y.shape[1], y.dtype)
    dims = (0, 2, 3)
    intersection = (y * t).sum(dims)
    denominator = y.sum(dims) + t.sum(dims)
    per_class = 1.0 - (2.0 * intersection + epsilon) / (denominator + epsilon)
    if not include_background:
        per_class = per_class[1:]
    return per_class.mean()


def cross_entropy(y: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Cross-entropy against a dense hard label map, averaged over all pixels."""
    _check_target(y, target)
    picked = y.gather(1, target.long().unsqueeze(1)).squeeze(1)
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()


@torch.no_grad()
def mix_pseudo_label(y1: torch.Tensor, y2: torch.Tensor, alpha: float) -> torch.Tensor:
    """Hard pseudo label ``argmax(alpha * y1 + (1 - alpha) * y2)``, detached.

    Ties resolve to the smallest class index.
    """
    _check_pair(y1, y2)
    mixed = alpha * y1.detach() + (1.0 - alpha) * y2.detach()
    return torch.argmax(mixed, dim=1)


def pls_loss(
    pl: torch.Tensor,
    y1: torch.Tensor,
    y2: torch.Tensor,
    weights: LossWeights | None = None,
) -> torch.Tensor:
    """Pseudo-label supervision: mean of both decoders' losses against ``pl``."""
    weights = weights or LossWeights()
    _check_pair(y1, y2)
    pl = pl.detach()
    if weights.pls_criterion == "ce":
        return 0.5 * (cross_entropy(y1, pl) + cross_entropy(y2, pl))
    return 0.5 * (
        dice_loss(y1, pl, weights.epsilon_dice, weights.dice_include_background)
        + dice_loss(y2, pl, weights.epsilon_dice, weights.dice_include_background)
    )


def cr_loss(y1: torch.Tensor, y2: torch.Tensor) -> torch.Tensor:
    """Consistency regularization: mean squared difference of the two predictions."""
    _check_pair(y1, y2)
    return ((y1 - y2) ** 2).mean()


def cps_loss(y1: torch.Tensor, y2: torch.Tensor, weights: LossWeights | None = None) -> torch.Tensor:
    """Cross pseudo supervision: each decoder fits the other's detached argmax with Dice."""
    weights = weights or LossWeights()
    _check_pair(y1, y2)
    pl1 = torch.argmax(y1.detach(), dim=1)
    pl2 = torch.argmax(y2.detach(), dim=1)
    return 0.5 * (
        dice_loss(y1, pl2, weights.epsilon_dice, weights.dice_include_background)
        + dice_loss(y2, pl1, weights.epsilon_dice, weights.dice_include_background)
    )


@dataclass
class LossDiagnostics:
    """Scalar breakdown of one evaluation of the joint objective."""

    loss_total: float
    loss_scribble: float
    loss_aux: float
    alpha: float
    lambda_pls: float

    def to_dict(self) -> dict:
        return {
            "loss_total": self.loss_total,
            "loss_scribble": self.loss_scribble,
            "loss_aux": self.loss_aux,
            "alpha": self.alpha,
        }


def auxiliary_loss(
    supervision: str,
    y1: torch.Tensor,
    y2: torch.Tensor,
    alpha: float,
    weights: LossWeights,
) -> torch.Tensor:
    """The term weighted by lambda for each supervision strategy (zero for ``pce``)."""
    if supervision == "pls":
        return pls_loss(mix_pseudo_label(y1, y2, alpha), y1, y2, weights)
    if supervision == "cps":
        return cps_loss(y1, y2, weights)
    if supervision == "cr":
        return cr_loss(y1, y2)
    if supervision == "pce":
        return y1.new_zeros(())
    raise ValidationError(f"unknown supervision {supervision!r} (expected one of {SUPERVISIONS})")


def total_loss(
    y1: torch.Tensor,
    y2: torch.Tensor,
    scribble: torch.Tensor,
    alpha: float,
    weights: LossWeights | None = None,
    supervision: str = "pls",
) -> tuple[torch.Tensor, LossDiagnostics]:
    """Joint objective: scribble term plus lambda times the strategy's auxiliary term.

    ``L = 0.5 (pCE(y1, s) + pCE(y2, s)) + lambda * aux``, where ``aux`` is the
    mixed pseudo-label loss for ``pls``, CPS for ``cps``, CR for ``cr`` and 0
    for ``pce``. With lambda = 0 the auxiliary term is still reported but
    contributes nothing to the graph.
    """
    weights = weights or LossWeights()
    _check_pair(y1, y2)
    scribble_term = 0.5 * (partial_cross_entropy(y1, scribble) + partial_cross_entropy(y2, scribble))

    if supervision == "pce" or weights.lambda_pls == 0:
        with torch.no_grad():
            aux = auxiliary_loss(supervision, y1, y2, alpha, weights)
        total = scribble_term
    else:
        aux = auxiliary_loss(supervision, y1, y2, alpha, weights)
        total = scribble_term + weights.lambda_pls * aux

    diagnostics = LossDiagnostics(
        loss_total=float(total.detach()),
        loss_scribble=float(scribble_term.detach()),
        loss_aux=float(aux.detach()),
        alpha=float(alpha),
        lambda_pls=weights.lambda_pls,
    )
    return total, diagnostics


def sample_alpha(rng: np.random.Generator, mode: str = "random", fixed_value: float = 0.5) -> float:
    """Mixing coefficient for one iteration.

    ``random`` draws uniformly from the open interval (0, 1) on every call;
    ``fixed`` always returns ``fixed_value``.

    Raises:
        ValidationError: If the mode is unknown or ``fixed_value`` is outside (0, 1)
    """
    if mode == "fixed":
        if not 0.0 < fixed_value < 1.0:
            raise ValidationError(f"fixed alpha must lie in (0, 1), got {fixed_value}")
        return float(fixed_value)
    if mode != "random":
        raise ValidationError(f"alpha mode must be 'random' or 'fixed', got {mode!r}")

    alpha = rng.random()
    while alpha == 0.0:
        alpha = rng.random()
    return float(alpha)
