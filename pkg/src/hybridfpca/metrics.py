"""Summary statistics for simulation reports: coefficient-surface error,
prediction error and correlation on train/test splits, timing, and the
median/quartile summarizer used by the report tables."""

from __future__ import annotations

import csv
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError, UndefinedCorrelationError
from .tensorcore import FLOAT_FMT

__all__ = [
    "mse_beta",
    "prediction_mspe",
    "prediction_correlation",
    "Timing",
    "timing_capture",
    "timed",
    "percentile_summary",
    "write_report_csv",
    "read_report_csv",
]


def mse_beta(true_surface, estimated_surface, n_subjects: int | None = None) -> float:
    """Mean squared difference between coefficient surfaces on a shared grid.

    Default is the grid-mean convention.  Passing ``n_subjects`` additionally
    divides by that count, replicating the reporting constant some summaries
    carry even though the estimate does not vary by subject.
    """
    t = np.asarray(true_surface, dtype=float)
    e = np.asarray(estimated_surface, dtype=float)
    if t.shape != e.shape:
        raise ShapeMismatchError(f"surface shapes differ: {t.shape} vs {e.shape}")
    out = float(np.mean((t - e) ** 2))
    if n_subjects is not None:
        out /= n_subjects
    return out


def prediction_mspe(actual, predicted, split: str = "train") -> float:
    """Per-subject summed squared prediction error, averaged over subjects.

    Sums over the grid (no division by curve length) and averages over the
    subjects of the named split; the caller passes the already-split arrays.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ShapeMismatchError(f"{split}: actual {a.shape} vs predicted {p.shape}")
    if a.ndim != 2:
        raise ShapeMismatchError("expected (subject, grid point) arrays")
    return float(np.mean(np.sum((a - p) ** 2, axis=1)))


def prediction_correlation(actual, predicted) -> float:
    """Pearson correlation between the flattened subject x grid arrays."""
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ShapeMismatchError(f"flattened lengths differ: {a.size} vs {p.size}")
    if np.ptp(a) == 0 or np.ptp(p) == 0:
        raise UndefinedCorrelationError("correlation undefined for a zero-variance array")
    return float(np.corrcoef(a, p)[0, 1])


@dataclass
class Timing:
    """Elapsed wall clock plus user/system CPU seconds where the platform reports them."""

    label: str
    elapsed: float = 0.0
    user: float | None = None
    system: float | None = None


@contextmanager
def timed(label: str):
    """Context manager filling a :class:`Timing` on exit."""
    t = Timing(label)
    start = time.perf_counter()
    try:
        cpu0 = os.times()
    except (AttributeError, OSError):
        cpu0 = None
    try:
        yield t
    finally:
        t.elapsed = time.perf_counter() - start
        if cpu0 is not None:
            cpu1 = os.times()
            t.user = cpu1.user - cpu0.user
            t.system = cpu1.system - cpu0.system


def timing_capture(label: str, fn, *args, **kwargs):
    """Run ``fn`` and return ``(result, Timing)``."""
    with timed(label) as t:
        result = fn(*args, **kwargs)
    return result, t


def percentile_summary(values) -> tuple[float, float, float]:
    """(median, q1, q3) with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    med, q1, q3 = np.percentile(v, [50, 25, 75], method="linear")
    return float(med), float(q1), float(q3)


REPORT_HEADER = ["scenario", "cell", "metric", "median", "q1", "q3", "iterations"]


@dataclass
class ReportRow:
    scenario: str
    cell: str
    metric: str
    median: float
    q1: float
    q3: float
    iterations: int = field(default=0)


def write_report_csv(path, rows) -> None:
    """One row per (cell, metric) carrying the median and quartiles."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_HEADER)
        for r in rows:
            w.writerow(
                [r.scenario, r.cell, r.metric, FLOAT_FMT % r.median, FLOAT_FMT % r.q1,
                 FLOAT_FMT % r.q3, r.iterations]
            )


def read_report_csv(path) -> list[ReportRow]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        ReportRow(
            scenario=r["scenario"],
            cell=r["cell"],
            metric=r["metric"],
            median=float(r["median"]),
            q1=float(r["q1"]),
            q3=float(r["q3"]),
            iterations=int(r["iterations"]),
        )
        for r in rows
    ]
