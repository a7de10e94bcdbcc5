"""Prioritization quality: ranking, correctness, error curves, APFD percent.

The efficacy measure is the area under the discrete cumulative-error curve,
normalized by the area an ideal ordering would reach.  With n ranked inputs
of which m are misclassified (or miss the regression threshold):

    AUC       = sum over k = 1..n of cum_errors[k]
    AUC_ideal = sum over k = 1..n of min(k, m)
    percent   = 100 * AUC / AUC_ideal

Every error-first ordering scores exactly 100; orderings are compared on
(0, 100].  A batch with no errors at all has no defined score and is
reported as an error rather than a perfect run.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DataError, FormatError, ShapeError
from .scoring import ScoreRecord

_CURVE_HEADER = ["rank", "input_index", "is_error", "cum_errors"]


@dataclass(frozen=True)
class CorrectnessVector:
    """Per-input ground truth: ``correct[i]`` is True when the model got input i right."""

    correct: np.ndarray
    task: str
    threshold: float | None = None

    def __post_init__(self):
        if self.correct.dtype != np.bool_ or self.correct.ndim != 1:
            raise ShapeError("correctness must be a 1-D boolean array")

    @property
    def n(self) -> int:
        return int(self.correct.shape[0])

    @property
    def errors(self) -> np.ndarray:
        return ~self.correct


@dataclass(frozen=True)
class EvalReport:
    method: str
    permutation: tuple[int, ...]
    cum_errors: tuple[int, ...]
    total_errors: int
    apfd_percent: float

    @property
    def n(self) -> int:
        return len(self.permutation)


def derive_correctness(predictions: np.ndarray, labels: np.ndarray, task: str,
                       threshold: float = 0.25) -> CorrectnessVector:
    """Compare model outputs against ground truth.

    Classification: correct iff the argmax class equals the label.
    Regression: correct iff the mean absolute error over output coordinates
    is <= threshold; sitting exactly on the threshold counts as correct.
    """
    preds = np.asarray(predictions)
    if preds.ndim == 1:
        preds = preds.reshape(-1, 1)
    if preds.ndim != 2 or preds.shape[0] == 0:
        raise ShapeError(f"predictions must be [N, out], got {np.asarray(predictions).shape}")
    n = preds.shape[0]

    if task == "classification":
        y = np.asarray(labels)
        if y.shape != (n,):
            raise ShapeError(f"labels shape {y.shape} does not match {n} predictions")
        if not np.issubdtype(y.dtype, np.integer):
            raise DataError("classification labels must be integer class indices")
        if y.size and int(y.max()) >= preds.shape[1]:
            raise DataError(
                f"label {int(y.max())} out of range for {preds.shape[1]} classes"
            )
        predicted = preds.argmax(axis=1)
        return CorrectnessVector(correct=(predicted == y), task=task)

    if task == "regression":
        y = np.asarray(labels, dtype=np.float64)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if y.shape != preds.shape:
            raise ShapeError(f"labels shape {y.shape} does not match predictions {preds.shape}")
        mae = np.mean(np.abs(preds.astype(np.float64) - y), axis=1)
        if threshold is None or not (threshold >= 0):
            raise DataError(f"regression threshold must be non-negative, got {threshold!r}")
        return CorrectnessVector(correct=(mae <= threshold), task=task, threshold=threshold)

    raise DataError(f"task must be 'classification' or 'regression', got {task!r}")


def rank_by_score(records: list[ScoreRecord]) -> tuple[int, ...]:
    """Input indices sorted by score descending; ties keep the given record order."""
    if not records:
        raise DataError("no score records to rank")
    methods = {r.method for r in records}
    if len(methods) != 1:
        raise DataError(f"records mix methods {sorted(methods)}")
    for r in records:
        if math.isnan(r.score):
            raise DataError(f"input {r.index}: NaN score cannot be ranked")
    scores = np.array([r.score for r in records], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    return tuple(int(records[i].index) for i in order)


def cumulative_error_curve(perm: tuple[int, ...], correctness: CorrectnessVector) -> tuple[int, ...]:
    """cum_errors[k] = errors among the first k+1 inputs of the permutation."""
    n = correctness.n
    if sorted(perm) != list(range(n)):
        raise DataError(f"ranking is not a permutation of 0..{n - 1}")
    errors = correctness.errors
    running = 0
    curve = []
    for idx in perm:
        running += int(errors[idx])
        curve.append(running)
    return tuple(curve)


def apfd_score(cum_errors: tuple[int, ...], total_errors: int) -> float:
    n = len(cum_errors)
    m = total_errors
    if n == 0:
        raise DataError("empty curve")
    if m == 0:
        raise DataError("no error-revealing inputs; prioritization quality is undefined")
    if cum_errors[-1] != m:
        raise DataError(f"curve ends at {cum_errors[-1]}, expected {m} total errors")
    auc = float(sum(cum_errors))
    ideal = m * (m + 1) // 2 + (n - m) * m
    return 100.0 * auc / ideal


def evaluate_prioritization(records: list[ScoreRecord], correctness: CorrectnessVector) -> EvalReport:
    """Full pipeline: rank, curve, percent.  Scores must cover inputs 0..n-1 exactly."""
    n = correctness.n
    indices = sorted(r.index for r in records)
    if indices != list(range(n)):
        raise DataError(f"scores must cover every input 0..{n - 1} exactly once")
    perm = rank_by_score(records)
    curve = cumulative_error_curve(perm, correctness)
    m = int(correctness.errors.sum())
    return EvalReport(
        method=records[0].method,
        permutation=perm,
        cum_errors=curve,
        total_errors=m,
        apfd_percent=apfd_score(curve, m),
    )


def select_top(records: list[ScoreRecord], fraction: float | None = None,
               k: int | None = None) -> list[int]:
    """First ceil(fraction * n) (or k) indices of the ranking, highest scores first.

    The fraction is re-read as an exact decimal so fraction 0.01 of 600 inputs
    selects 6, never 7 from a one-ulp product excess.
    """
    if (fraction is None) == (k is None):
        raise DataError("exactly one of fraction and k must be given")
    n = len(records)
    perm = rank_by_score(records)
    if fraction is not None:
        if not (0.0 < fraction <= 1.0):
            raise DataError(f"fraction must be in (0, 1], got {fraction}")
        count = int(math.ceil(Fraction(str(fraction)) * n))
    else:
        if not (1 <= k <= n):
            raise DataError(f"k must be in [1, {n}], got {k}")
        count = k
    return list(perm[:count])


# ---------------------------------------------------------------------------
# Curve CSV and JSON report


def write_curve(report: EvalReport, correctness: CorrectnessVector, path) -> None:
    errors = correctness.errors
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CURVE_HEADER)
        for rank, idx in enumerate(report.permutation, start=1):
            writer.writerow([rank, idx, int(errors[idx]), report.cum_errors[rank - 1]])


def write_report(report: EvalReport, path) -> None:
    doc = {
        "method": report.method,
        "n": report.n,
        "m": report.total_errors,
        "apfd_percent": report.apfd_percent,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_indices(indices: list[int], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index"])
        for idx in indices:
            writer.writerow([idx])


def read_indices(path) -> list[int]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index"]:
            raise FormatError(f"{path}: expected header 'index'")
        return [int(row[0]) for row in reader if row]


__all__ = [
    "CorrectnessVector",
    "EvalReport",
    "apfd_score",
    "cumulative_error_curve",
    "derive_correctness",
    "evaluate_prioritization",
    "rank_by_score",
    "read_indices",
    "select_top",
    "write_curve",
    "write_indices",
    "write_report",
]
