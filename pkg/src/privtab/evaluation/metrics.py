"""Ranking metrics: AUROC (Mann-Whitney) and average precision.

AUROC is computed exactly from average ranks, which equals the pair-count
statistic P(score_pos > score_neg) + 0.5 P(tie). Average precision is the
uninterpolated step sum of precision at each positive in descending-score
order; ties are broken by a deterministic shuffle keyed by `seed`, so a
constant-score ranker attains chance level equal to the positive prevalence
in expectation over seeds.
"""

from __future__ import annotations

import numpy as np

from ..errors import UndefinedMetricError


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(np.int64)
    if s.shape[0] != y.shape[0]:
        raise UndefinedMetricError(f"scores ({s.shape[0]}) and labels ({y.shape[0]}) differ in length")
    if s.shape[0] == 0:
        raise UndefinedMetricError("empty inputs")
    if not np.isin(y, (0, 1)).all():
        raise UndefinedMetricError("labels must be 0/1")
    return s, y


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the group average (exact halves)."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), exact via rank statistics."""
    s, y = _validate(scores, labels)
    m = int(y.sum())
    n = y.size - m
    if m == 0 or n == 0:
        raise UndefinedMetricError("auroc undefined: both classes must be present")
    r_pos = _average_ranks(s)[y == 1].sum()
    return (r_pos - m * (m + 1) / 2.0) / (m * n)


def aucpr(scores, labels, seed: int = 0) -> float:
    """Average precision, no interpolation; tie order seeded by `seed`."""
    s, y = _validate(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("aucpr undefined: no positive examples")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(s.size)
    s, y = s[perm], y[perm]
    order = np.argsort(-s, kind="mergesort")  # stable: ties keep shuffled order
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    precision = tp / np.arange(1, y_sorted.size + 1)
    return float(precision[y_sorted == 1].sum() / n_pos)
