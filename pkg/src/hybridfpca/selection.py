"""Choosing how many eigencomponents to keep, by prediction error.

For each candidate count q the response tensor is reconstructed from the
first q ranked components, pooled to one curve per subject, and regressed on
the predictor curves with a fixed train/test split.  q = 0 is the
no-decomposition baseline: the raw tensor is pooled directly.  The candidate
with the smallest test MSPE wins, ties going to the smaller q.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError, ShapeMismatchError
from .fofreg import FofConfig, fit_fof, predict, train_test_split_indices
from .hpca import fit_hpca, reconstruct
from .pooling import pool_to_curve
from .tensorcore import FLOAT_FMT, FunctionalSample, HybridTensor

__all__ = [
    "SelectionResult",
    "mspe",
    "select_num_components",
    "write_selection_csv",
    "read_selection_csv",
    "save_selection_result",
]

SELECTION_HEADER = ["q", "mspe_train", "mspe_test", "seconds"]


@dataclass(frozen=True)
class SelectionResult:
    """Per-q prediction errors and the chosen component count.

    ``mspe_by_q`` and ``train_mspe_by_q`` map q in {0, 1, ..., KLM} to the
    test and training errors; ``trace`` maps q to wall seconds spent on that
    candidate.  ``q_min`` attains the minimum test error (smallest such q).
    """

    mspe_by_q: dict[int, float]
    train_mspe_by_q: dict[int, float]
    q_min: int
    split_seed: int
    trace: dict[int, float]

    def __post_init__(self):
        keys = set(self.mspe_by_q)
        if keys != set(self.train_mspe_by_q) or keys != set(self.trace):
            raise InvalidConfigError("per-q maps must share one key set")
        best = min(self.mspe_by_q.values())
        if self.mspe_by_q[self.q_min] > best:
            raise InvalidConfigError("q_min must attain the minimum test MSPE")

    @property
    def n_candidates(self) -> int:
        return len(self.mspe_by_q)


def mspe(actual: FunctionalSample, predicted: FunctionalSample) -> float:
    """Grid-and-subject mean of squared prediction error, (1/(n*M)) * sum."""
    if actual.curves.shape != predicted.curves.shape:
        raise ShapeMismatchError(
            f"sample shapes differ: {actual.curves.shape} vs {predicted.curves.shape}"
        )
    return float(np.mean((actual.curves - predicted.curves) ** 2))


def _subset(sample: FunctionalSample, idx: np.ndarray) -> FunctionalSample:
    return FunctionalSample(curves=sample.curves[idx], grid=sample.grid)


def _evaluate_candidate(response, train_predictors, test_predictors, train_idx, test_idx, config):
    started = time.perf_counter()
    fitted = fit_fof(_subset(response, train_idx), train_predictors, config)
    train_err = mspe(_subset(response, train_idx), predict(fitted, train_predictors))
    test_err = mspe(_subset(response, test_idx), predict(fitted, test_predictors))
    return train_err, test_err, time.perf_counter() - started


def select_num_components(
    tensor: HybridTensor,
    predictors: list[FunctionalSample],
    fof_config: FofConfig,
    fve_target: float = 0.9,
    threads: int = 1,
) -> SelectionResult:
    """Scan q = 0..KLM and pick the count with the smallest test MSPE.

    The decomposition is fitted once; each candidate response is the pooled
    prefix reconstruction (q = 0 pools the raw data).  One seeded subject
    split, taken from ``fof_config``, is shared by every candidate.
    """
    if len(predictors) == 0:
        raise InvalidConfigError("need at least one predictor sample")
    n = tensor.n_subjects
    for j, p in enumerate(predictors, start=1):
        if p.n_subjects != n:
            raise ShapeMismatchError(
                f"predictor {j} has {p.n_subjects} subjects, tensor has {n}"
            )
    model = fit_hpca(tensor, fve_target=fve_target)
    train_idx, test_idx = train_test_split_indices(n, fof_config.train_fraction, fof_config.seed)
    train_predictors = [_subset(p, train_idx) for p in predictors]
    test_predictors = [_subset(p, test_idx) for p in predictors]

    def response_for(q: int) -> FunctionalSample:
        if q == 0:
            return pool_to_curve(tensor)
        return pool_to_curve(reconstruct(model, q))

    def run(q: int):
        return _evaluate_candidate(
            response_for(q), train_predictors, test_predictors, train_idx, test_idx, fof_config
        )

    candidates = range(model.n_components + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, candidates))
    else:
        outcomes = [run(q) for q in candidates]

    train_map, test_map, trace = {}, {}, {}
    for q, (train_err, test_err, seconds) in zip(candidates, outcomes):
        train_map[q] = train_err
        test_map[q] = test_err
        trace[q] = seconds
    q_min = min(test_map, key=lambda q: (test_map[q], q))
    return SelectionResult(
        mspe_by_q=test_map,
        train_mspe_by_q=train_map,
        q_min=q_min,
        split_seed=fof_config.seed,
        trace=trace,
    )


def write_selection_csv(path, qs, mspe_train, mspe_test, seconds) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SELECTION_HEADER)
        for q, tr, te, sec in zip(qs, mspe_train, mspe_test, seconds):
            writer.writerow([int(q), FLOAT_FMT % tr, FLOAT_FMT % te, FLOAT_FMT % sec])


def read_selection_csv(path):
    """Columns of a selection CSV as arrays (qs, mspe_train, mspe_test, seconds)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    qs = np.array([int(r["q"]) for r in rows])
    train = np.array([float(r["mspe_train"]) for r in rows])
    test = np.array([float(r["mspe_test"]) for r in rows])
    seconds = np.array([float(r["seconds"]) for r in rows])
    return qs, train, test, seconds


def save_selection_result(result: SelectionResult, directory, stem: str = "selection") -> None:
    """CSV of the per-q traces plus a JSON summary with the chosen count."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    qs = sorted(result.mspe_by_q)
    write_selection_csv(
        directory / f"{stem}.csv",
        qs,
        [result.train_mspe_by_q[q] for q in qs],
        [result.mspe_by_q[q] for q in qs],
        [result.trace[q] for q in qs],
    )
    summary = {
        "q_min": result.q_min,
        "split_seed": result.split_seed,
        "n_candidates": result.n_candidates,
        "mspe_test_at_q_min": result.mspe_by_q[result.q_min],
    }
    (directory / f"{stem}.json").write_text(json.dumps(summary, indent=2) + "\n")
