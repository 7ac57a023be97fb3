"""Filter products to control ranges and compare defect rates."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset import DatasetError, ProcessDataset
from .gbdt.ensemble import round_half_up
from .ice import ControlRange

NA = "N/A"


def filter_in_range(ds: ProcessDataset, ranges: Sequence[ControlRange]) -> ProcessDataset:
    """Rows inside every range (closed on both ends), original order kept."""
    keep = np.ones(ds.n_rows, dtype=bool)
    for r in ranges:
        if r.feature_name not in ds.feature_names:
            raise DatasetError(f"range refers to unknown feature {r.feature_name!r}")
        keep &= r.contains(ds.column(r.feature_name))
    return ds.take(keep)


def defect_ratio(ds: ProcessDataset) -> float | None:
    """Unrounded defect percentage, or ``None`` for an empty set."""
    if ds.n_rows == 0:
        return None
    return 100.0 * float(np.sum(ds.target == 0)) / ds.n_rows


def defect_rate(ds: ProcessDataset) -> float | None:
    """Defect percentage rounded half-up to 2 decimals; ``None`` means N/A."""
    r = defect_ratio(ds)
    return None if r is None else round_half_up(r, 2)


def format_rate(rate: float | None) -> str:
    return NA if rate is None else f"{rate:.2f}"


@dataclass(frozen=True)
class ValidationRow:
    label: str
    alpha: float | None
    normal: int
    defect: int
    ratio: float | None  # unrounded percentage

    @property
    def rate(self) -> float | None:
        return None if self.ratio is None else round_half_up(self.ratio, 2)

    @property
    def is_empty(self) -> bool:
        return self.normal + self.defect == 0


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]
    baseline: ValidationRow

    def improved(self, row: ValidationRow) -> bool:
        """Filtered rate strictly below the baseline (an empty filter is not
        an improvement, it is N/A)."""
        return row.ratio is not None and self.baseline.ratio is not None and row.ratio < self.baseline.ratio

    def by_alpha(self) -> dict[float, ValidationRow]:
        return {r.alpha: r for r in self.rows}


def _row(label, alpha, ds: ProcessDataset) -> ValidationRow:
    normal, defect = ds.class_counts()
    return ValidationRow(label, alpha, normal, defect, defect_ratio(ds))


def group_by_alpha(ranges: Sequence[ControlRange]) -> dict[float, list[ControlRange]]:
    out = defaultdict(list)
    for r in ranges:
        out[r.alpha].append(r)
    return dict(sorted(out.items()))


def validation_report(
    test: ProcessDataset, ranges_per_alpha: Mapping[float, Sequence[ControlRange]], baseline: ProcessDataset | None = None
) -> ValidationReport:
    """One row per alpha (ascending) plus the unfiltered baseline.

    ``test`` must be the held-out split that was never oversampled.
    """
    base = _row("Original Data", None, test if baseline is None else baseline)
    rows = tuple(
        _row(f"alpha = {a:g}", a, filter_in_range(test, rs)) for a, rs in sorted(ranges_per_alpha.items())
    )
    return ValidationReport(rows, base)


REPORT_HEADER = ("row", "alpha", "normal", "defect", "defect_rate_percent", "defect_ratio_percent", "improved")


def write_report_csv(report: ValidationReport, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in (*report.rows, report.baseline):
            empty = r.is_empty
            w.writerow([
                r.label,
                "" if r.alpha is None else repr(r.alpha),
                NA if empty and r.alpha is not None else r.normal,
                NA if empty and r.alpha is not None else r.defect,
                format_rate(r.rate),
                NA if r.ratio is None else repr(r.ratio),
                "" if r.alpha is None else int(report.improved(r)),
            ])


def read_report_csv(path) -> ValidationReport:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            alpha = float(r["alpha"]) if r["alpha"] else None
            normal = 0 if r["normal"] == NA else int(r["normal"])
            defect = 0 if r["defect"] == NA else int(r["defect"])
            ratio = None if r["defect_ratio_percent"] == NA else float(r["defect_ratio_percent"])
            rows.append(ValidationRow(r["row"], alpha, normal, defect, ratio))
    base = [r for r in rows if r.alpha is None]
    if len(base) != 1:
        raise ValueError(f"{path}: expected exactly one baseline row")
    return ValidationReport(tuple(r for r in rows if r.alpha is not None), base[0])


def render_table(report: ValidationReport, title: str = "") -> str:
    """Aligned plain-text table: Normal, Defect, Defect rate (%)."""
    head = [title, "Normal", "Defect", "Defect rate (%)"]
    body = []
    for r in (*report.rows, report.baseline):
        if r.is_empty:
            body.append([r.label, NA, NA, NA])
        else:
            body.append([r.label, str(r.normal), str(r.defect), format_rate(r.rate)])
    widths = [max(len(row[i]) for row in [head, *body]) for i in range(4)]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))) for row in [head, *body]]
    return "\n".join(line.rstrip() for line in lines) + "\n"
