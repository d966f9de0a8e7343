"""Metrics comparing quality scores and flags against ground-truth error sets.

Examples are ranked by ascending score (lowest = most suspicious) and
compared against which examples truly contain annotation errors. AP@T
restricts average precision to the bottom-T ranked examples; with T = N it
coincides exactly with AUPRC. The "at least k errors" variants target
severely mislabeled examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ErrorTruth:
    """Ground-truth targets: per-example error flags and error counts."""

    error_flags: np.ndarray   # (N,) bool: any per-class annotation wrong
    error_counts: np.ndarray  # (N,) int: number of wrong per-class annotations

    def __post_init__(self):
        flags = np.array(self.error_flags, dtype=bool, copy=True)
        counts = np.array(self.error_counts, dtype=np.int64, copy=True)
        if flags.shape != counts.shape or flags.ndim != 1:
            raise ValueError("error_flags and error_counts must be matching 1-D arrays")
        if (counts < 0).any():
            raise ValueError("error counts must be non-negative")
        if not np.array_equal(flags, counts > 0):
            raise ValueError("error_flags must equal (error_counts > 0)")
        flags.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "error_flags", flags)
        object.__setattr__(self, "error_counts", counts)

    @property
    def n_mislabeled(self) -> int:
        return int(self.error_flags.sum())


def error_truth(given_labels: np.ndarray, true_labels: np.ndarray) -> ErrorTruth:
    """Build the evaluation targets by comparing given labels with ground truth."""
    given = np.asarray(given_labels)
    truth = np.asarray(true_labels)
    if given.shape != truth.shape:
        raise ValueError(f"shape mismatch: {given.shape} vs {truth.shape}")
    counts = (given != truth).sum(axis=1)
    return ErrorTruth(counts > 0, counts)


@dataclass(frozen=True)
class MetricResult:
    """A single metric value plus the parameters it was computed with.

    ``value`` is NaN when the metric is undefined (e.g. Spearman on a
    constant vector); it is reported as missing, never silently as 0.
    """

    name: str
    value: float
    param_t: int | None = None
    param_k: int | None = None
    n_positives: int | None = None

    @property
    def missing(self) -> bool:
        return math.isnan(self.value)


def rank_ascending(scores: np.ndarray) -> np.ndarray:
    """Stable ascending ordering; ties break by original index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError("scores must be 1-D")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    return np.argsort(scores, kind="stable")


def ap_at_t(
    scores: np.ndarray, truth: ErrorTruth, t: int | None = None, min_errors: int = 1
) -> MetricResult:
    """Average precision over the bottom-T scored examples.

    Positives are examples with at least ``min_errors`` wrong per-class
    annotations. The denominator is the number of positives among the
    bottom T (clamped to at least 1), which makes AP@N equal standard
    average precision. T defaults to the number of truly mislabeled
    examples.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if truth.error_counts.shape[0] != n:
        raise ValueError(f"{n} scores vs {truth.error_counts.shape[0]} truth entries")
    if min_errors < 1:
        raise ValueError("min_errors must be >= 1")
    if t is None:
        t = truth.n_mislabeled
    if not 1 <= t <= n:
        raise ValueError(f"T must be in [1, {n}], got {t}")

    positive = truth.error_counts >= min_errors
    rel = positive[rank_ascending(scores)][:t]
    hits = np.cumsum(rel)
    precision_at = hits / np.arange(1, t + 1)
    value = float((precision_at * rel).sum() / max(1, int(rel.sum())))
    return MetricResult(
        name=f"ap{min_errors if min_errors > 1 else ''}_at_t",
        value=value,
        param_t=int(t),
        param_k=min_errors,
        n_positives=int(positive.sum()),
    )


def auprc(scores: np.ndarray, truth: ErrorTruth) -> MetricResult:
    """Area under the precision-recall curve; identical to AP@N by definition."""
    if truth.n_mislabeled == 0:
        raise ValueError("AUPRC is undefined with no mislabeled examples")
    result = ap_at_t(scores, truth, t=len(np.asarray(scores)), min_errors=1)
    return MetricResult("auprc", result.value, param_t=result.param_t,
                        param_k=1, n_positives=result.n_positives)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..N with ties assigned the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(scores: np.ndarray, error_counts: np.ndarray) -> MetricResult:
    """Spearman rank correlation between scores and per-example error counts.

    Reported raw: a good scorer gives strongly *negative* values because low
    scores should coincide with many errors. Undefined (NaN) when either
    input is constant.
    """
    x = np.asarray(scores, dtype=np.float64)
    y = np.asarray(error_counts, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be matching 1-D arrays")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 examples")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return MetricResult("spearman", math.nan)
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    value = float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))
    return MetricResult("spearman", value)
