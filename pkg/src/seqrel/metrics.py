"""Ranking and regression metrics with strict domain checking.

Classification quality is measured on a scored set (parallel score/label
arrays) by the area under the precision-recall step curve and by the best
recall among descending-score prefix cuts whose precision clears a target.
Regression quality uses root mean square error and symmetric mean absolute
percentage error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, MetricDomainError, UndefinedMetricError

DEFAULT_PRECISION_TARGET = 0.9


@dataclass
class ScoredSet:
    """Parallel per-sample scores and ground-truth labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __init__(self, scores, labels):
        self.scores = np.asarray(scores, dtype=np.float64).reshape(-1)
        self.labels = np.asarray(labels, dtype=np.float64).reshape(-1)
        if self.scores.shape[0] != self.labels.shape[0]:
            raise DimensionError(
                f"scores ({self.scores.shape[0]}) and labels "
                f"({self.labels.shape[0]}) differ in length")
        if self.scores.shape[0] == 0:
            raise DimensionError("scored set is empty")
        if not (np.isfinite(self.scores).all() and np.isfinite(self.labels).all()):
            raise MetricDomainError("scores and labels must be finite")

    def __len__(self) -> int:
        return self.scores.shape[0]

    def require_binary(self) -> None:
        if not np.isin(self.labels, (0.0, 1.0)).all():
            raise MetricDomainError("classification labels must be 0 or 1")


def _tie_grouped_counts(s: ScoredSet):
    """Cumulative true/false positive counts after each tied-score group,
    sweeping scores from high to low."""
    order = np.argsort(-s.scores, kind="stable")
    labels = s.labels[order]
    # last index of each tied group in the descending order
    desc = s.scores[order]
    group_end = np.nonzero(np.append(desc[1:] != desc[:-1], True))[0]
    tp = np.cumsum(labels)[group_end]
    cut = group_end + 1.0
    return tp, cut - tp


def auprc(s: ScoredSet) -> float:
    """Area under the precision-recall step curve, tied scores grouped."""
    s.require_binary()
    total_pos = s.labels.sum()
    if total_pos == 0:
        raise UndefinedMetricError("auprc needs at least one positive label")
    tp, fp = _tie_grouped_counts(s)
    recall = tp / total_pos
    precision = tp / (tp + fp)
    steps = np.diff(recall, prepend=0.0)
    return float(np.sum(steps * precision))


def recall_at_precision(s: ScoredSet, p: float = DEFAULT_PRECISION_TARGET) -> float:
    """Best recall over descending-score prefix cuts with precision >= p.

    Tied scores enter a cut together; returns 0.0 when no cut qualifies.
    """
    s.require_binary()
    if not 0.0 < p <= 1.0:
        raise MetricDomainError(f"precision target must be in (0, 1], got {p}")
    total_pos = s.labels.sum()
    if total_pos == 0:
        raise UndefinedMetricError(
            "recall_at_precision needs at least one positive label")
    tp, fp = _tie_grouped_counts(s)
    ok = tp / (tp + fp) >= p
    if not ok.any():
        return 0.0
    return float(np.max(tp[ok]) / total_pos)


def rmse(s: ScoredSet) -> float:
    """Root mean square error between predictions and labels."""
    return float(np.sqrt(np.mean((s.labels - s.scores) ** 2)))


def smape(s: ScoredSet) -> float:
    """Symmetric mean absolute percentage error.

    Each pair contributes |y - yhat| / ((y + yhat) / 2); pairs with both
    values zero contribute 0, and a nonpositive sum with either value
    nonzero is outside the metric's domain.
    """
    total = s.labels + s.scores
    both_zero = (s.labels == 0.0) & (s.scores == 0.0)
    if np.any((total <= 0.0) & ~both_zero):
        raise MetricDomainError("smape needs pairwise sums > 0 (or both zero)")
    diff = np.abs(s.labels - s.scores)
    terms = np.where(both_zero, 0.0, diff / np.where(both_zero, 1.0, total / 2.0))
    return float(np.mean(terms))
