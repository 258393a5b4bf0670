"""Per-case evaluation and cross-case aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import CLASS_NAMES, FOREGROUND
from scribble_seg.metrics.overlap import BinaryVolume, dsc3d, hd95

MEAN_COLUMN = "Mean"
COLUMNS = FOREGROUND + (MEAN_COLUMN,)


@dataclass
class StructureMetrics:
    """Metrics of one foreground structure in one case."""

    dsc: float
    hd95: float
    pred_empty: bool = False
    gt_empty: bool = False

    @property
    def hd95_sentinel(self) -> bool:
        """True when hd95 holds the diagonal placeholder (exactly one mask empty)."""
        return self.pred_empty != self.gt_empty

    def to_dict(self) -> dict:
        return {
            "dsc": self.dsc,
            "hd95": self.hd95,
            "pred_empty": self.pred_empty,
            "gt_empty": self.gt_empty,
            "hd95_sentinel": self.hd95_sentinel,
        }


@dataclass
class CaseMetrics:
    """Metrics of one evaluated volume, keyed by structure name."""

    case_id: str
    structures: dict[str, StructureMetrics] = field(default_factory=dict)

    @property
    def mean_dsc(self) -> float:
        return float(np.mean([m.dsc for m in self.structures.values()]))

    @property
    def mean_hd95(self) -> float:
        return float(np.mean([m.hd95 for m in self.structures.values()]))

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "structures": {name: m.to_dict() for name, m in self.structures.items()},
            "mean_dsc": self.mean_dsc,
            "mean_hd95": self.mean_hd95,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CaseMetrics":
        structures = {
            name: StructureMetrics(
                dsc=float(m["dsc"]),
                hd95=float(m["hd95"]),
                pred_empty=bool(m.get("pred_empty", False)),
                gt_empty=bool(m.get("gt_empty", False)),
            )
            for name, m in data["structures"].items()
        }
        return cls(case_id=str(data["case_id"]), structures=structures)


def evaluate_case(
    pred_vol: np.ndarray,
    gt_vol: np.ndarray,
    spacing: tuple[float, float, float],
    case_id: str = "",
    structures: tuple[str, ...] = FOREGROUND,
) -> CaseMetrics:
    """Binarize each foreground class and compute its DSC and HD95.

    Raises:
        ValidationError: If the label volumes differ in shape
    """
    pred_vol = np.asarray(pred_vol)
    gt_vol = np.asarray(gt_vol)
    if pred_vol.shape != gt_vol.shape:
        raise ValidationError(f"prediction shape {pred_vol.shape} != ground truth shape {gt_vol.shape}")

    case = CaseMetrics(case_id=case_id)
    for name in structures:
        cls = CLASS_NAMES.index(name)
        pred = BinaryVolume(pred_vol == cls, spacing)
        gt = BinaryVolume(gt_vol == cls, spacing)
        case.structures[name] = StructureMetrics(
            dsc=dsc3d(pred, gt),
            hd95=hd95(pred, gt),
            pred_empty=pred.empty,
            gt_empty=gt.empty,
        )
    return case


@dataclass
class Summary:
    """Mean and population standard deviation of one metric column."""

    mean: float
    std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass
class AggregateTable:
    """Mean/std of DSC and HD95 per structure plus the per-case mean column."""

    dsc: dict[str, Summary]
    hd95: dict[str, Summary]
    n_cases: int
    sentinel_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "n_cases": self.n_cases,
            "dsc": {k: v.to_dict() for k, v in self.dsc.items()},
            "hd95": {k: v.to_dict() for k, v in self.hd95.items()},
            "hd95_sentinel_cases": dict(self.sentinel_counts),
        }


def _summarize(values: list[float]) -> Summary:
    array = np.asarray(values, dtype=np.float64)
    return Summary(mean=float(array.mean()), std=float(array.std(ddof=0)))


def aggregate(cases: list[CaseMetrics]) -> AggregateTable:
    """Mean and population std per structure, plus the same for per-case means.

    The ``Mean`` column first averages the three structures within each case,
    then aggregates those per-case values. Sentinel HD95 values are included
    as-is and counted in ``sentinel_counts``.

    Raises:
        ValidationError: If ``cases`` is empty
    """
    if not cases:
        raise ValidationError("cannot aggregate an empty list of cases")

    dsc: dict[str, Summary] = {}
    hd: dict[str, Summary] = {}
    sentinels: dict[str, int] = {}
    for name in FOREGROUND:
        dsc[name] = _summarize([c.structures[name].dsc for c in cases])
        hd[name] = _summarize([c.structures[name].hd95 for c in cases])
        sentinels[name] = sum(c.structures[name].hd95_sentinel for c in cases)

    dsc[MEAN_COLUMN] = _summarize([c.mean_dsc for c in cases])
    hd[MEAN_COLUMN] = _summarize([c.mean_hd95 for c in cases])
    sentinels[MEAN_COLUMN] = sum(any(m.hd95_sentinel for m in c.structures.values()) for c in cases)
    return AggregateTable(dsc=dsc, hd95=hd, n_cases=len(cases), sentinel_counts=sentinels)
