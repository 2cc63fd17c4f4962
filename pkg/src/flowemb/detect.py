"""Distance-based anomaly scoring of weekly representations.

Each cluster gets a scorer built from the training split's representations;
a week's anomaly score is the mean Euclidean distance to its ``k_nn``
nearest training weeks. Search is exhaustive: reference sets are small and
the tests pin exact agreement with an all-pairs oracle, which rules out
approximate indexes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["AnomalyScore", "KnnScorer", "knn_score", "score_all"]


@dataclass(frozen=True)
class AnomalyScore:
    """Score for one (user, week); higher means more anomalous."""

    user_id: str
    week_index: str
    score: float


class KnnScorer:
    """Immutable nearest-neighbor scorer over a fixed reference set."""

    def __init__(self, references: np.ndarray, k_nn: int = 5):
        refs = np.asarray(references, dtype=np.float64)
        if refs.ndim != 2 or refs.shape[0] == 0:
            raise ValueError(f"references must be a non-empty 2-D array, got {refs.shape}")
        if not np.all(np.isfinite(refs)):
            raise ValueError("references contain non-finite values")
        if not 1 <= k_nn <= refs.shape[0]:
            raise ValueError(
                f"k_nn must be in 1..{refs.shape[0]} (reference count), got {k_nn}"
            )
        self.references = refs.copy()
        self.references.setflags(write=False)
        self.k_nn = int(k_nn)

    @property
    def dim(self) -> int:
        return self.references.shape[1]

    def distances(self, q: np.ndarray) -> np.ndarray:
        """Euclidean distance from ``q`` to every reference point."""
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.dim,):
            raise ValueError(f"expected a query of shape ({self.dim},), got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("query contains non-finite values")
        diff = self.references - q
        return np.sqrt((diff * diff).sum(axis=1))

    def neighbors(self, q: np.ndarray) -> np.ndarray:
        """Indices of the k nearest references; ties keep insertion order."""
        return np.argsort(self.distances(q), kind="stable")[: self.k_nn]

    def score(self, q: np.ndarray) -> float:
        """Mean distance to the k nearest references."""
        dists = self.distances(q)
        idx = np.argsort(dists, kind="stable")[: self.k_nn]
        return float(np.mean(dists[idx]))

    def kth_distance(self, q: np.ndarray) -> float:
        """Distance to the k-th nearest reference (the largest of the k)."""
        dists = self.distances(q)
        idx = np.argsort(dists, kind="stable")[: self.k_nn]
        return float(dists[idx[-1]])


def knn_score(
    scorer: KnnScorer, q: np.ndarray, user_id: str = "", week_index: str = ""
) -> AnomalyScore:
    return AnomalyScore(user_id=user_id, week_index=week_index, score=scorer.score(q))


def score_all(
    scorer: KnnScorer,
    queries: np.ndarray,
    ids: Sequence[tuple[str, str]] | None = None,
) -> list[AnomalyScore]:
    """Score a batch of queries, preserving input order."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2:
        raise ValueError(f"expected queries of shape (m, {scorer.dim}), got {queries.shape}")
    if ids is not None and len(ids) != queries.shape[0]:
        raise ValueError(f"got {len(ids)} ids for {queries.shape[0]} queries")
    out = []
    for i in range(queries.shape[0]):
        user_id, week_index = ids[i] if ids is not None else ("", "")
        out.append(knn_score(scorer, queries[i], user_id, week_index))
    return out
