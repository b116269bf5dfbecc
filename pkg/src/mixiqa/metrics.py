"""Rank and linear correlation metrics plus cross-dataset aggregation.

SRCC is the Pearson correlation of average (fractional) ranks, so it is
invariant under any strictly increasing transform of either argument. That
invariance is what lets evaluation run on the shared quality scale directly:
calibrating through a dataset's monotone map cannot change a single rank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UndefinedCorrelationError


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values receive the mean of their positions."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray, what: str) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    vx = float(np.dot(xc, xc))
    vy = float(np.dot(yc, yc))
    if vx == 0.0 or vy == 0.0:
        side = "first" if vx == 0.0 else "second"
        raise UndefinedCorrelationError(f"{what} undefined: zero variance in {side} argument")
    r = float(np.dot(xc, yc) / np.sqrt(vx * vy))
    return min(1.0, max(-1.0, r))


def _check_lengths(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.size != t.size:
        raise ConfigError(f"prediction/truth lengths differ: {p.size} vs {t.size}")
    if p.size < 2:
        raise UndefinedCorrelationError(f"correlation needs n >= 2, got n={p.size}")
    return p, t


def srcc(pred, truth) -> float:
    """Spearman rank-order correlation with average ranks for ties."""
    p, t = _check_lengths(pred, truth)
    return _pearson(average_ranks(p), average_ranks(t), "SRCC")


def plcc(pred, truth) -> float:
    """Pearson linear correlation."""
    p, t = _check_lengths(pred, truth)
    return _pearson(p, t, "PLCC")


@dataclass(frozen=True)
class CorrelationResult:
    srcc: float
    plcc: float
    n: int


def correlate(pred, truth) -> CorrelationResult:
    p, t = _check_lengths(pred, truth)
    return CorrelationResult(srcc=srcc(p, t), plcc=plcc(p, t), n=p.size)


@dataclass(frozen=True)
class WeightedReport:
    """Per-dataset correlations plus image-number-weighted means."""

    per_dataset: dict[str, CorrelationResult]
    weighted_srcc: float
    weighted_plcc: float


def weighted_report(results: dict[str, CorrelationResult]) -> WeightedReport:
    if not results:
        raise ConfigError("weighted_report: no datasets")
    total = sum(r.n for r in results.values())
    w_s = sum(r.n * r.srcc for r in results.values()) / total
    w_p = sum(r.n * r.plcc for r in results.values()) / total
    return WeightedReport(per_dataset=dict(results), weighted_srcc=w_s, weighted_plcc=w_p)


def _median(values: list[float]) -> float:
    """Median with the even-length convention of averaging the middle pair."""
    s = sorted(values)
    n = len(s)
    mid = n // 2
    if n % 2 == 1:
        return s[mid]
    return 0.5 * (s[mid - 1] + s[mid])


def median_over_splits(reports: list[WeightedReport]) -> WeightedReport:
    """Elementwise median across split reports (per dataset and weighted)."""
    if not reports:
        raise ConfigError("median_over_splits: no reports")
    datasets = sorted({d for r in reports for d in r.per_dataset})
    per: dict[str, CorrelationResult] = {}
    for d in datasets:
        rs = [r.per_dataset[d] for r in reports if d in r.per_dataset]
        per[d] = CorrelationResult(
            srcc=_median([r.srcc for r in rs]),
            plcc=_median([r.plcc for r in rs]),
            n=rs[0].n,
        )
    return WeightedReport(
        per_dataset=per,
        weighted_srcc=_median([r.weighted_srcc for r in reports]),
        weighted_plcc=_median([r.weighted_plcc for r in reports]),
    )


# ---------------------------------------------------------------------------
# line-oriented JSON serialization
# ---------------------------------------------------------------------------

def report_to_jsonl(report: WeightedReport) -> str:
    """One {dataset, n, srcc, plcc} row per dataset, then the weighted row."""
    lines = []
    for d in sorted(report.per_dataset):
        r = report.per_dataset[d]
        lines.append(json.dumps({"dataset": d, "n": r.n, "srcc": r.srcc, "plcc": r.plcc}))
    lines.append(
        json.dumps({"weighted_srcc": report.weighted_srcc, "weighted_plcc": report.weighted_plcc})
    )
    return "\n".join(lines) + "\n"


def report_from_jsonl(text: str) -> WeightedReport:
    per: dict[str, CorrelationResult] = {}
    weighted = None
    for line in text.splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if "dataset" in row:
            per[row["dataset"]] = CorrelationResult(srcc=row["srcc"], plcc=row["plcc"], n=row["n"])
        else:
            weighted = row
    if weighted is None or not per:
        raise ConfigError("report_from_jsonl: missing rows")
    return WeightedReport(
        per_dataset=per,
        weighted_srcc=weighted["weighted_srcc"],
        weighted_plcc=weighted["weighted_plcc"],
    )


def report_as_table(report: WeightedReport, title: str = "") -> str:
    """Aligned text table for humans; the JSONL form is for machines."""
    rows = [("dataset", "n", "srcc", "plcc")]
    for d in sorted(report.per_dataset):
        r = report.per_dataset[d]
        rows.append((d, str(r.n), f"{r.srcc:+.4f}", f"{r.plcc:+.4f}"))
    total_n = sum(r.n for r in report.per_dataset.values())
    rows.append(("weighted", str(total_n), f"{report.weighted_srcc:+.4f}", f"{report.weighted_plcc:+.4f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = [title] if title else []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * widths[i] for i in range(4)))
    return "\n".join(lines)
