"""Paired significance testing between two methods evaluated on the same cases."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from scribble_seg.common.errors import ValidationError

# Largest n for which all 2**n sign patterns are enumerated
EXHAUSTIVE_MAX_N = 14
MONTE_CARLO_FLIPS = 10_000


@dataclass
class PairedTestResult:
    """Paired t statistic with a sign-flip permutation p-value."""

    statistic: float
    p_value: float
    n: int
    method: str

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n": self.n,
            "method": self.method,
            "note": "p-value from a two-sided sign-flip permutation test; statistic is the paired t",
        }


def _paired_t(diff: np.ndarray) -> float:
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return 0.0
        return math.copysign(math.inf, mean)
    return float(mean / (sd / math.sqrt(len(diff))))


def paired_test(
    a: list[float],
    b: list[float],
    seed: int = 0,
    n_flips: int = MONTE_CARLO_FLIPS,
) -> PairedTestResult:
    """Compare paired per-case scores ``a`` and ``b``.

    The statistic is the paired t of ``a - b``. The two-sided p-value is the
    fraction of sign patterns applied to the differences whose absolute mean
    is at least the observed one: all ``2**n`` patterns when n <= 14,
    otherwise ``n_flips`` seeded random patterns.

    Raises:
        ValidationError: If the lists differ in length or have fewer than two pairs
    """
    if len(a) != len(b):
        raise ValidationError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValidationError("paired test needs at least two pairs")

    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    n = len(diff)
    observed = abs(diff.mean())
    tolerance = 1e-12 * max(1.0, float(np.abs(diff).max()))

    if n <= EXHAUSTIVE_MAX_N:
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
        method = "exhaustive"
    else:
        rng = np.random.default_rng(seed)
        signs = rng.choice((1.0, -1.0), size=(n_flips, n))
        method = "monte-carlo"

    means = np.abs(signs @ diff) / n
    p_value = float(np.mean(means >= observed - tolerance))
    return PairedTestResult(statistic=_paired_t(diff), p_value=p_value, n=n, method=method)
