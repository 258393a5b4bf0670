"""Consolidated reports: JSON with per-case data, CSV and Markdown tables."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path

from scribble_seg.common.config import canonical_json
from scribble_seg.common.errors import ValidationError
from scribble_seg.data.config import FOREGROUND
from scribble_seg.harness.config import OPTIONAL_STRATEGIES, REFERENCE_STRATEGY, REPORT_FORMATS, STRATEGIES
from scribble_seg.harness.experiments import RunFailureRecord, RunRecord
from scribble_seg.metrics.evaluation import COLUMNS, AggregateTable, CaseMetrics, aggregate
from scribble_seg.metrics.stats import PairedTestResult, paired_test

logger = logging.getLogger(__name__)

REPORT_STEM = "report"
LAMBDA_SWEEP_CSV = "lambda_sweep.csv"
AGGREGATION_NOTE = "per-case metrics pooled across folds, then mean and population std over cases"
DECODER_ORDER = ("main", "aux")
ARM_ORDER = STRATEGIES + OPTIONAL_STRATEGIES


@dataclass
class ReportRow:
    """One table row: an arm evaluated with one decoder, pooled over folds."""

    arm: str
    decoder: str
    lambda_pls: float | None
    scribble_source: str
    config_hash: str
    folds: list[int]
    cases: list[CaseMetrics]
    table: AggregateTable
    vs_reference: PairedTestResult | None = None

    def to_dict(self) -> dict:
        return {
            "arm": self.arm,
            "decoder": self.decoder,
            "lambda_pls": self.lambda_pls,
            "scribble_source": self.scribble_source,
            "config_hash": self.config_hash,
            "folds": self.folds,
            "aggregate": self.table.to_dict(),
            "paired_test_vs_pce": self.vs_reference.to_dict() if self.vs_reference else None,
            "cases": [c.to_dict() for c in self.cases],
        }


def _row_key(row: ReportRow) -> tuple:
    lam = row.lambda_pls if row.lambda_pls is not None else -1.0
    arm_rank = ARM_ORDER.index(row.arm) if row.arm in ARM_ORDER else len(ARM_ORDER)
    return (lam, arm_rank, row.arm, DECODER_ORDER.index(row.decoder))


def build_rows(records: list[RunRecord]) -> list[ReportRow]:
    """Pool records by (arm, decoder) and test each row against the pCE baseline.

    Raises:
        ValidationError: If ``records`` is empty or a case is evaluated twice in one row
    """
    if not records:
        raise ValidationError("no run records to report")

    grouped: dict[tuple[str, str], list[RunRecord]] = {}
    for record in records:
        grouped.setdefault((record.arm, record.decoder), []).append(record)

    rows = []
    for (arm, decoder), group in grouped.items():
        group = sorted(group, key=lambda r: r.fold)
        cases = sorted((c for r in group for c in r.cases), key=lambda c: c.case_id)
        ids = [c.case_id for c in cases]
        if len(ids) != len(set(ids)):
            raise ValidationError(f"{arm}/{decoder}: a case was evaluated in more than one fold")
        rows.append(
            ReportRow(
                arm=arm,
                decoder=decoder,
                lambda_pls=group[0].lambda_pls,
                scribble_source=group[0].scribble_source,
                config_hash=group[0].config_hash,
                folds=[r.fold for r in group],
                cases=cases,
                table=aggregate(cases),
            )
        )
    rows.sort(key=_row_key)

    reference = next((r for r in rows if r.arm == REFERENCE_STRATEGY and r.decoder == "main"), None)
    reference = reference or next((r for r in rows if r.arm == REFERENCE_STRATEGY), None)
    if reference is not None:
        ref_scores = {c.case_id: c.mean_dsc for c in reference.cases}
        for row in rows:
            if row is reference:
                continue
            shared = [c for c in row.cases if c.case_id in ref_scores]
            if len(shared) < 2:
                continue
            row.vs_reference = paired_test([c.mean_dsc for c in shared], [ref_scores[c.case_id] for c in shared])
    return rows


def format_cell(mean: float, std: float, digits: int) -> str:
    """Render ``mean(std)``, e.g. ``0.872(0.077)``."""
    return f"{mean:.{digits}f}({std:.{digits}f})"


def _header(with_lambda: bool) -> list[str]:
    header = ["arm", "decoder"]
    if with_lambda:
        header.append("lambda")
    header += [f"{c} DSC" for c in COLUMNS]
    header += [f"{c} HD95" for c in COLUMNS]
    header += ["n_cases", "p_value_vs_pce"]
    return header


def _cells(row: ReportRow, with_lambda: bool) -> list[str]:
    cells = [row.arm, row.decoder]
    if with_lambda:
        cells.append(f"{row.lambda_pls:g}" if row.lambda_pls is not None else "")
    cells += [format_cell(row.table.dsc[c].mean, row.table.dsc[c].std, 3) for c in COLUMNS]
    cells += [format_cell(row.table.hd95[c].mean, row.table.hd95[c].std, 1) for c in COLUMNS]
    cells.append(str(row.table.n_cases))
    cells.append(f"{row.vs_reference.p_value:.4g}" if row.vs_reference else "")
    return cells


def render_csv(rows: list[ReportRow]) -> str:
    with_lambda = any(r.lambda_pls is not None for r in rows)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(_header(with_lambda))
    for row in rows:
        writer.writerow(_cells(row, with_lambda))
    return buffer.getvalue()


def render_markdown(rows: list[ReportRow], experiment: str) -> str:
    with_lambda = any(r.lambda_pls is not None for r in rows)
    header = _header(with_lambda)
    lines = [f"# {experiment}", "", f"Aggregation: {AGGREGATION_NOTE}.", ""]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "|".join("---" for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(c or "-" for c in _cells(row, with_lambda)) + " |")
    if any(r.table.sentinel_counts[c] for r in rows for c in FOREGROUND):
        lines += ["", "HD95 includes diagonal placeholders for cases where exactly one mask is empty."]
    return "\n".join(lines) + "\n"


def render_lambda_sweep(rows: list[ReportRow]) -> str:
    """Plot-ready ``lambda,mean_dsc,std_dsc,mean_hd95,std_hd95`` table, lambda ascending."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["lambda", "mean_dsc", "std_dsc", "mean_hd95", "std_hd95"])
    for row in sorted((r for r in rows if r.lambda_pls is not None), key=lambda r: r.lambda_pls):
        dsc = row.table.dsc["Mean"]
        hd = row.table.hd95["Mean"]
        writer.writerow([f"{row.lambda_pls:g}", f"{dsc.mean:.6f}", f"{dsc.std:.6f}", f"{hd.mean:.6f}", f"{hd.std:.6f}"])
    return buffer.getvalue()


def emit_report(
    records: list[RunRecord],
    formats: tuple[str, ...] | list[str] = REPORT_FORMATS,
    path: Path | str = ".",
    failures: list[RunFailureRecord] | None = None,
) -> list[Path]:
    """Write ``report.json``/``report.csv``/``report.md`` into ``path``.

    Output depends only on the records, never on the order they arrive in or
    on timing. A lambda sweep also gets ``lambda_sweep.csv``.

    Returns:
        The files written, in a fixed order

    Raises:
        ValidationError: If ``records`` is empty or a format is unknown
        OSError: If the directory cannot be written
    """
    unknown = sorted(set(formats) - set(REPORT_FORMATS))
    if unknown:
        raise ValidationError(f"unknown report format(s): {', '.join(unknown)}")

    rows = build_rows(records)
    experiment = sorted({r.experiment for r in records})[0]
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)

    written = []
    if "json" in formats:
        document = {
            "experiment": experiment,
            "aggregation": AGGREGATION_NOTE,
            "comparison_hash": sorted({r.comparison_hash for r in records}),
            "folds_digest": sorted({r.folds_digest for r in records}),
            "rows": [row.to_dict() for row in rows],
            "failures": [
                {"arm": f.arm, "fold": f.fold, "error": f.error}
                for f in sorted(failures or [], key=lambda f: (f.arm, f.fold))
            ],
        }
        written.append(_write(out / f"{REPORT_STEM}.json", canonical_json(document)))
    if "csv" in formats:
        written.append(_write(out / f"{REPORT_STEM}.csv", render_csv(rows)))
    if "md" in formats:
        written.append(_write(out / f"{REPORT_STEM}.md", render_markdown(rows, experiment)))
    if any(r.lambda_pls is not None for r in rows):
        written.append(_write(out / LAMBDA_SWEEP_CSV, render_lambda_sweep(rows)))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    logger.info("wrote %s", path)
    return path
