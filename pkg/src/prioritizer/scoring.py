"""Sentiment scores: softmax entropy, dropout disagreement, surprise adequacy.

Every method maps one input to one non-negative float where larger means the
model is less sure of itself, so sorting scores descending puts the inputs
most worth labeling first.

softmax
    Shannon entropy (natural log) of the deterministic class distribution.

dropout
    For classification, entropy of the mean class distribution over T
    stochastic passes.  For regression, the mean squared deviation of the T
    output vectors around their mean (summed over output coordinates), which
    equals the average of per-pass squared norms minus the squared norm of
    the mean but stays exactly 0.0 when every pass agrees.

dsa
    Distance-based surprise: a = distance from the query's activation trace
    to the nearest training trace with the same predicted class (call it r),
    b = distance from r to the nearest training trace of any other class;
    the score is a / b.  Ties pick the training trace with the smallest
    index; a == 0 scores 0.0 and b == 0 (with a > 0) scores inf.

Scores travel as CSV with header ``index,method,score``, values printed with
nine significant digits and infinity spelled ``inf``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .engine import (
    DETERMINISTIC,
    ForwardMode,
    _check_batch,
    _pmap,
    capture_traces,
    forward,
    predict_batch,
)
from .errors import DataError, FormatError, ShapeError
from .formats import ModelManifest
from .tensor import Tensor

SCORE_METHODS = ("softmax", "dropout", "dsa")
_CSV_HEADER = ["index", "method", "score"]


@dataclass(frozen=True)
class ScoreRecord:
    index: int
    method: str
    score: float


@dataclass(frozen=True)
class McConfig:
    """Stochastic-pass budget: ``samples`` forward passes seeded by ``seed``."""

    samples: int = 10
    seed: int = 42

    def __post_init__(self):
        if self.samples < 1:
            raise DataError(f"samples must be >= 1, got {self.samples}")


def entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats; zero-probability terms contribute nothing."""
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size == 0 or (p < 0).any():
        raise DataError("entropy requires a non-empty vector of non-negative values")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def _require_task(model: ModelManifest, task: str, method: str) -> None:
    if model.task != task:
        raise DataError(f"method {method!r} requires a {task} model, this one is {model.task}")


def score_softmax(model: ModelManifest, inputs: Tensor, threads: int = 1) -> np.ndarray:
    """Entropy of each input's deterministic class distribution."""
    _require_task(model, "classification", "softmax")
    probs = predict_batch(model, inputs, DETERMINISTIC, threads=threads)
    return np.array([entropy(row) for row in probs], dtype=np.float64)


def _stochastic_rows(model: ModelManifest, x: np.ndarray, input_index: int,
                     cfg: McConfig) -> np.ndarray:
    rows = []
    for t in range(cfg.samples):
        mode = ForwardMode(deterministic=False, global_seed=cfg.seed,
                           input_index=input_index, sample_index=t)
        y, _ = forward(model, Tensor(x), mode)
        rows.append(y.array.reshape(-1))
    return np.stack(rows)


def score_dropout(model: ModelManifest, inputs: Tensor, cfg: McConfig,
                  threads: int = 1) -> np.ndarray:
    """Disagreement across stochastic passes; statistic depends on the task.

    Classification inputs get the entropy of the mean class distribution;
    regression inputs get the trace of the empirical output covariance
    (biased, divided by T).
    """
    if not model.has_dropout():
        raise DataError("model declares no dropout layers; stochastic scoring is undefined")
    n = _check_batch(model, inputs)

    def run(i: int) -> float:
        rows = _stochastic_rows(model, inputs.array[i], i, cfg)
        mean = np.mean(rows, axis=0, dtype=np.float64)
        if model.task == "classification":
            return entropy(mean)
        centered = rows.astype(np.float64) - mean
        var = float(np.sum(centered * centered) / cfg.samples)
        return max(var, 0.0)

    return np.array(_pmap(run, n, threads), dtype=np.float64)


@dataclass(frozen=True)
class DsaIndex:
    """Training activation traces grouped by predicted class.

    Per class, traces keep ascending original order so first-minimum lookups
    resolve distance ties toward the smallest training index.
    """

    class_traces: dict
    other_traces: dict
    dim: int

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self.class_traces))


def build_dsa_index(traces: np.ndarray, classes: np.ndarray) -> DsaIndex:
    traces = np.asarray(traces)
    classes = np.asarray(classes)
    if traces.ndim != 2 or traces.shape[0] == 0:
        raise ShapeError(f"training traces must be a non-empty [N, D] array, got {traces.shape}")
    if classes.shape != (traces.shape[0],):
        raise ShapeError(f"classes shape {classes.shape} does not match {traces.shape[0]} traces")
    if not np.isfinite(traces).all():
        raise DataError("training traces contain non-finite values")
    labels = sorted(int(c) for c in np.unique(classes))
    if len(labels) < 2:
        raise DataError("surprise scoring needs training traces from at least two classes")
    tf = traces.astype(np.float64)
    class_traces = {c: tf[classes == c] for c in labels}
    other_traces = {c: tf[classes != c] for c in labels}
    return DsaIndex(class_traces=class_traces, other_traces=other_traces, dim=traces.shape[1])


def _nearest_sq(candidates: np.ndarray, point: np.ndarray) -> tuple[int, float]:
    diffs = candidates - point
    d2 = np.einsum("ij,ij->i", diffs, diffs)
    pos = int(np.argmin(d2))
    return pos, float(d2[pos])


def dsa_value(index: DsaIndex, trace: np.ndarray, predicted_class: int) -> float:
    """Surprise of one query trace given its predicted class."""
    point = np.asarray(trace, dtype=np.float64).reshape(-1)
    if point.shape[0] != index.dim:
        raise ShapeError(f"query trace has dimension {point.shape[0]}, index holds {index.dim}")
    c = int(predicted_class)
    if c not in index.class_traces:
        raise DataError(f"no training trace predicted as class {c}")
    pos, a2 = _nearest_sq(index.class_traces[c], point)
    if a2 == 0.0:
        return 0.0
    anchor = index.class_traces[c][pos]
    _, b2 = _nearest_sq(index.other_traces[c], anchor)
    if b2 == 0.0:
        return math.inf
    return math.sqrt(a2) / math.sqrt(b2)


def score_dsa(model: ModelManifest, inputs: Tensor, layer_names: tuple[str, ...],
              index: DsaIndex, threads: int = 1) -> np.ndarray:
    """Surprise of each input's deterministic trace at the named layers."""
    _require_task(model, "classification", "dsa")
    query = capture_traces(model, inputs, layer_names, threads=threads)
    return np.array(
        [dsa_value(index, t, c) for t, c in zip(query.traces, query.classes)],
        dtype=np.float64,
    )


# ---------------------------------------------------------------------------
# Scores CSV


def write_scores(records: list[ScoreRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for rec in records:
            writer.writerow([rec.index, rec.method, f"{rec.score:.9g}"])


def read_scores(path) -> list[ScoreRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise FormatError(f"{path}: expected header {','.join(_CSV_HEADER)!r}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                idx = int(row[0])
                score = float(row[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if idx < 0:
                raise FormatError(f"{path}:{lineno}: index must be non-negative")
            if math.isnan(score):
                raise FormatError(f"{path}:{lineno}: score must not be NaN")
            records.append(ScoreRecord(index=idx, method=row[1], score=score))
    if not records:
        raise FormatError(f"{path}: no score rows")
    seen = {r.index for r in records}
    if len(seen) != len(records):
        raise FormatError(f"{path}: duplicate input indices")
    return records


def records_for(method: str, scores: np.ndarray) -> list[ScoreRecord]:
    return [ScoreRecord(index=i, method=method, score=float(s)) for i, s in enumerate(scores)]


__all__ = [
    "SCORE_METHODS",
    "DsaIndex",
    "McConfig",
    "ScoreRecord",
    "build_dsa_index",
    "dsa_value",
    "entropy",
    "read_scores",
    "records_for",
    "score_dropout",
    "score_dsa",
    "score_softmax",
    "write_scores",
]
