"""Assessment of derived series against ground truth.

Metric functions return ``None`` for NA (not available).
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import SampledSeries

SOURCE_ORDER = ("LP", "TC", "G")
REPORT_HEADER = ["quantity", "source", "rho", "mape_pct", "match_rate_pct", "n_samples"]

# a standard deviation below this fraction of the series' magnitude counts as zero
ZERO_STD_RTOL = 1e-9


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, SampledSeries) else np.asarray(x, dtype=float)


def _joint(a, b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(a, SampledSeries) and isinstance(b, SampledSeries) and a.grid != b.grid:
        raise ValueError("series do not share a grid")
    a, b = _values(a), _values(b)
    if a.shape != b.shape:
        raise ValueError(f"series lengths differ: {a.shape} vs {b.shape}")
    m =~np.isnan(a) & ~np.isnan(b)
    return a[m], b[m]


def _is_flat(x: np.ndarray) -> bool:
    dev = x - x.mean()
    scale = max(float(np.abs(x).max()), 1e-300)
    return float(np.sqrt((dev * dev).mean())) <= ZERO_STD_RTOL * scale


def pcc(a, b) -> float | None:
    """Pearson correlation over jointly present samples.

    NA when fewer than two joint samples remain or either side has (numerically)
    zero standard deviation.
    """
    x, y = _joint(a, b)
    if len(x) < 2 or _is_flat(x) or _is_flat(y):
        return None
    dx, dy = x - x.mean(), y - y.mean()
    r = float((dx @ dy) / math.sqrt((dx @ dx) * (dy @ dy)))
    return max(-1.0, min(1.0, r))


@dataclass(frozen=True)
class MapeResult:
    value: float | None
    n_used: int
    n_zero_excluded: int


def mape_detail(y, yhat) -> MapeResult:
    t, p = _joint(y, yhat)
    nz = t != 0
    n_zero = int((~nz).sum())
    if not nz.any():
        return MapeResult(None, 0, n_zero)
    val = float(np.mean(np.abs((t[nz] - p[nz]) / t[nz])) * 100.0)
    return MapeResult(val, int(nz.sum()), n_zero)


def mape(y, yhat) -> float | None:
    """Mean absolute percentage error in %, ground truth first; zero truths are skipped."""
    return mape_detail(y, yhat).value


def r2_and_adj(y, yhat, p: int) -> tuple[float | None, float | None]:
    t, f = _joint(y, yhat)
    n = len(t)
    if n < p + 2:
        raise ValueError(f"need at least p + 2 = {p + 2} joint samples, got {n}")
    ss_tot = float(((t - t.mean()) ** 2).sum())
    if ss_tot == 0:
        return None, None
    ss_res = float(((t - f) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)
    return r2, adj


@dataclass(frozen=True)
class ReportRow:
    quantity: str
    source: str
    rho: float | None
    mape_pct: float | None
    match_rate_pct: float | None
    n_samples: int

    def __post_init__(self):
        if self.rho is not None and not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho out of range: {self.rho}")
        if self.mape_pct is not None and self.mape_pct < 0:
            raise ValueError("MAPE must be non-negative")


@dataclass(frozen=True)
class AssessmentReport:
    rows: tuple[ReportRow, ...] = field(default_factory=tuple)
    metadata: Mapping[str, str] = field(default_factory=dict)

    def get(self, quantity: str, source: str) -> ReportRow:
        for r in self.rows:
            if r.quantity == quantity and r.source == source:
                return r
        raise KeyError((quantity, source))


def _quantity_key(q: str):
    m = re.fullmatch(r"([A-Za-z_]+)(\d*)", q)
    if not m:
        return (q, 0)
    # flows before travel times, then numeric spot/route order
    return (m.group(1) != "q", m.group(1), int(m.group(2) or 0))


def assemble_report(
    quantities: Mapping[str, Mapping[str, SampledSeries]],
    match_rates: Mapping[tuple[str, str], float] | None = None,
    truth: str = "GT",
) -> AssessmentReport:
    """One row per (quantity, non-truth source), scored against ``truth``.

    ``match_rates`` maps ``(quantity, source)`` to an average matching rate
    as a fraction.
    """
    match_rates = match_rates or {}
    rows = []
    n_zero = 0
    for q in sorted(quantities, key=_quantity_key):
        by_src = quantities[q]
        gt = by_src[truth]
        extra = sorted(s for s in by_src if s != truth and s not in SOURCE_ORDER)
        for src in [s for s in SOURCE_ORDER if s in by_src] + extra:
            est = by_src[src]
            x, _ = _joint(gt, est)
            md = mape_detail(gt, est)
            n_zero += md.n_zero_excluded
            mr = match_rates.get((q, src))
            rows.append(
                ReportRow(q, src, pcc(gt, est), md.value, None if mr is None else 100.0 * mr, len(x))
            )
    meta = {"mape_zero_truth_rule": "excluded", "mape_zero_truth_excluded": str(n_zero)}
    return AssessmentReport(tuple(rows), meta)


def _fmt(v) -> str:
    return "NA" if v is None else repr(float(v))


def _parse(v: str) -> float | None:
    return None if v == "NA" else float(v)


def write_report(report: AssessmentReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in report.rows:
            w.writerow([r.quantity, r.source, _fmt(r.rho), _fmt(r.mape_pct), _fmt(r.match_rate_pct), r.n_samples])


def read_report(path) -> AssessmentReport:
    from .io import ParseError

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != REPORT_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(REPORT_HEADER)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                q, src, rho, mp, mr, n = rec
                rows.append(ReportRow(q, src, _parse(rho), _parse(mp), _parse(mr), int(n)))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return AssessmentReport(tuple(rows))


def format_table(report: AssessmentReport) -> str:
    """Plain-text rendering: one line per row, NA literal."""

    def cell(v, digits=2):
        return "NA" if v is None else f"{v:.{digits}f}"

    lines = [f"{'quantity':<8} {'src':<4} {'rho':>6} {'MAPE%':>8} {'match%':>7} {'n':>5}"]
    for r in report.rows:
        lines.append(
            f"{r.quantity:<8} {r.source:<4} {cell(r.rho):>6} {cell(r.mape_pct):>8} "
            f"{cell(r.match_rate_pct, 0):>7} {r.n_samples:>5}"
        )
    return "\n".join(lines)
