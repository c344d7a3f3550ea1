"""Ranking metrics for imbalanced binary detection: ROC-AUC and Recall@K."""

from __future__ import annotations

import numpy as np


def roc_auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative.

    Mann-Whitney statistic with midrank tie correction, so equal scores
    count half. Requires both classes to be present.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(np.int64)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < sorted_scores.size:
        j = i
        while j + 1 < sorted_scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # midrank of the tie block [i, j], 1-based
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def recall_at_k(scores, labels, k: int) -> float:
    """Fraction of all positives ranked within the top-k scores.

    Ties at the cutoff break by ascending node index, which keeps the
    metric deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1).astype(np.int64)
    if k < 1:
        raise ValueError("k must be at least 1")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise ValueError("recall_at_k needs at least one positive")
    order = np.lexsort((np.arange(scores.size), -scores))
    hits = int(labels[order[:k]].sum())
    return hits / n_pos


def default_k(labels) -> int:
    """Anomaly-budget convention: K equals the number of positives."""
    n_pos = int(np.asarray(labels).reshape(-1).astype(np.int64).sum())
    if n_pos == 0:
        raise ValueError("no positives in the evaluated set")
    return n_pos
