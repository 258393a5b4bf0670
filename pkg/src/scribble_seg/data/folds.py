"""Patient-level k-fold splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scribble_seg.common.config import stable_hash
from scribble_seg.common.errors import ValidationError


@dataclass
class FoldSplit:
    """Assignment of every patient to exactly one of ``k`` folds."""

    k: int
    assignments: dict[str, int]

    def test_patients(self, fold: int) -> list[str]:
        """Patients held out in ``fold``, sorted."""
        return sorted(p for p, f in self.assignments.items() if f == fold)

    def train_patients(self, fold: int) -> list[str]:
        """Patients used for training when ``fold`` is held out, sorted."""
        return sorted(p for p, f in self.assignments.items() if f != fold)

    def fold_sizes(self) -> list[int]:
        return [len(self.test_patients(f)) for f in range(self.k)]

    def to_dict(self) -> dict:
        return {"k": self.k, "assignments": dict(sorted(self.assignments.items()))}

    @property
    def digest(self) -> str:
        """Hash of the assignment, used to prove arms of an ablation share folds."""
        return stable_hash(self.to_dict())


def split_folds(patient_ids: list[str], k: int, seed: int) -> FoldSplit:
    """Shuffle patients deterministically and deal them round-robin into ``k`` folds.

    Args:
        patient_ids: Patient identifiers (duplicates are ignored)
        k: Number of folds, at least 2
        seed: Shuffle seed

    Returns:
        FoldSplit whose fold sizes differ by at most one

    Raises:
        ValidationError: If k < 2 or there are fewer patients than folds
    """
    patients = sorted(set(patient_ids))
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    if len(patients) < k:
        raise ValidationError(f"cannot split {len(patients)} patient(s) into {k} folds")

    order = np.random.default_rng(seed).permutation(len(patients))
    assignments = {patients[idx]: rank % k for rank, idx in enumerate(order)}
    return FoldSplit(k=k, assignments=assignments)
