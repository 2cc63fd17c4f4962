"""User population segmentation.

Numeric profiles are clustered with Lloyd k-means (k-means++ seeding);
categorical profiles with k-modes (Hamming distance, per-attribute modes).
Cluster count is chosen by sweeping k and keeping the best mean silhouette
coefficient. All randomness flows through the package RNG, and rows are
expected in canonical (sorted-by-user) order — :func:`cluster_users` takes
care of that, so the partition does not depend on input row order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from flowemb.numkernel import Rng

logger = logging.getLogger(__name__)

__all__ = [
    "ClusterModel",
    "SilhouetteResult",
    "kmeans_fit",
    "kmodes_fit",
    "silhouette",
    "select_k",
    "cluster_users",
]


@dataclass
class ClusterModel:
    method: str  # "kmeans" | "kmodes"
    k: int
    centers: np.ndarray  # (k, d); category codes for kmodes
    assignments: np.ndarray  # (n,) cluster index per row
    cost: float  # inertia (kmeans) / total Hamming distance (kmodes)
    seed: int
    cost_history: list[float] = field(default_factory=list)


@dataclass
class SilhouetteResult:
    a: np.ndarray
    b: np.ndarray
    sc: np.ndarray
    mean_sc: float
    indices: np.ndarray  # rows of X the coefficients refer to


def _validate_rows(x: np.ndarray, k: int) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("clustering requires a non-empty 2-D array")
    if not 1 <= k <= x.shape[0]:
        raise ValueError(f"k={k} must be in 1..{x.shape[0]} (number of rows)")
    return x


def _squared_distances(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared euclidean distances via the expanded gram form
    d2 = (
        (x * x).sum(axis=1)[:, None]
        - 2.0 * x @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(x: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.randint(n)]
    for j in range(1, k):
        d2 = _squared_distances(x, centers[:j]).min(axis=1)
        total = float(d2.sum())
        if total <= 0.0:  # all remaining points coincide with a chosen center
            centers[j] = x[rng.randint(n)]
            continue
        u = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), u, side="right"))
        centers[j] = x[min(idx, n - 1)]
    return centers


def kmeans_fit(x: np.ndarray, k: int, seed: int, max_iter: int = 100) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops at an assignment fixpoint or after ``max_iter`` rounds. A cluster
    that empties out is re-seeded to the point currently farthest from its
    own center, so the model always keeps k live centers. The recorded
    inertia sequence is non-increasing.
    """
    x = _validate_rows(np.asarray(x, dtype=np.float64), k)
    n = x.shape[0]
    rng = Rng(seed)
    centers = _kmeans_pp_init(x, k, rng)

    labels = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iter):
        d2 = _squared_distances(x, centers)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

        point_d2 = d2[np.arange(n), labels].copy()
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                centers[c] = x[far]
                point_d2[far] = -1.0  # don't hand the same point to two clusters

    return ClusterModel("kmeans", k, centers, labels, history[-1], seed, history)


def _hamming_to_centers(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    n, k = x.shape[0], centers.shape[0]
    d = np.zeros((n, k))
    for c in range(k):
        d[:, c] = (x != centers[c]).sum(axis=1)
    return d


def _column_mode(values: np.ndarray) -> int:
    cats, counts = np.unique(values, return_counts=True)
    return int(cats[counts.argmax()])  # ties: np.unique sorts, argmax takes first


def kmodes_fit(x: np.ndarray, k: int, seed: int, max_iter: int = 100) -> ClusterModel:
    """K-modes for integer-coded categorical rows.

    Dissimilarity is the Hamming distance; each center attribute is updated
    to the most frequent category among members, ties resolved toward the
    lowest category code. Empty clusters re-seed to the row farthest (in
    Hamming distance) from its current center.
    """
    x = _validate_rows(np.asarray(x), k)
    if not np.issubdtype(x.dtype, np.integer):
        raise ValueError("kmodes expects integer-coded categorical rows")
    n = x.shape[0]
    rng = Rng(seed)
    centers = x[np.asarray(rng.sample(range(n), k))].copy()

    labels = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iter):
        d = _hamming_to_centers(x, centers)
        new_labels = d.argmin(axis=1)
        history.append(float(d[np.arange(n), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

        point_d = d[np.arange(n), labels].copy()
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = [
                    _column_mode(x[members, col]) for col in range(x.shape[1])
                ]
            else:
                far = int(point_d.argmax())
                centers[c] = x[far]
                point_d[far] = -1.0

    return ClusterModel("kmodes", k, centers, labels, history[-1], seed, history)


def _distance_matrix(x: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        x = np.asarray(x, dtype=np.float64)
        g = x @ x.T
        sq = np.diag(g)
        d2 = np.maximum(sq[:, None] - 2.0 * g + sq[None, :], 0.0)
        return np.sqrt(d2)
    if metric == "hamming":
        n = x.shape[0]
        d = np.zeros((n, n))
        for col in range(x.shape[1]):
            d += (x[:, col][:, None] != x[:, col][None, :]).astype(np.float64)
        return d
    raise ValueError(f"unknown metric {metric!r}")


def silhouette(
    x: np.ndarray,
    assignments: np.ndarray,
    metric: str = "euclidean",
    sample_cap: int = 20_000,
    sample_size: int = 5_000,
    seed: int = 0,
) -> SilhouetteResult:
    """Silhouette coefficients SC(i) = (b(i) - a(i)) / max(a(i), b(i)).

    a(i) is the mean distance to the other members of i's cluster (0 for a
    singleton, whose SC is 0 by convention); b(i) is the smallest mean
    distance to any other cluster. The all-pairs computation is quadratic,
    so above ``sample_cap`` rows a seeded subsample of ``sample_size`` rows
    is scored instead.
    """
    x = np.asarray(x)
    assignments = np.asarray(assignments)
    if x.ndim != 2 or x.shape[0] != assignments.shape[0]:
        raise ValueError("rows and assignments must align")
    if np.unique(assignments).size < 2:
        raise ValueError("silhouette requires at least 2 non-empty clusters")

    n = x.shape[0]
    if n > sample_cap:
        rng = Rng(seed).derive("silhouette-subsample")
        indices = np.asarray(sorted(rng.sample(range(n), sample_size)))
        x = x[indices]
        assignments = assignments[indices]
        if np.unique(assignments).size < 2:
            raise ValueError("silhouette subsample collapsed to a single cluster")
        n = sample_size
    else:
        indices = np.arange(n)

    dist = _distance_matrix(x, metric)
    clusters = np.unique(assignments)
    members = {c: np.flatnonzero(assignments == c) for c in clusters}

    a = np.zeros(n)
    b = np.zeros(n)
    sc = np.zeros(n)
    for i in range(n):
        own = members[assignments[i]]
        if own.size > 1:
            a[i] = dist[i, own].sum() / (own.size - 1)
        b[i] = min(
            dist[i, members[c]].mean() for c in clusters if c != assignments[i]
        )
        if own.size == 1:
            sc[i] = 0.0
        else:
            denom = max(a[i], b[i])
            sc[i] = (b[i] - a[i]) / denom if denom > 0 else 0.0
    return SilhouetteResult(a, b, sc, float(sc.mean()), indices)


def select_k(
    x: np.ndarray,
    k_range: Sequence[int],
    method: str = "kmeans",
    seed: int = 0,
    max_iter: int = 100,
) -> tuple[int, dict[int, float]]:
    """Sweep k over ``k_range``; keep the best mean silhouette.

    Each k gets an independent RNG stream derived from (seed, k), so the
    sweep order cannot perturb any individual fit. Ties go to the smallest
    k.
    """
    ks = sorted(set(int(k) for k in k_range))
    if any(k < 2 for k in ks):
        raise ValueError("select_k requires k >= 2 (silhouette needs two clusters)")
    if not ks:
        raise ValueError("empty k range")
    fit = kmeans_fit if method == "kmeans" else kmodes_fit
    metric = "euclidean" if method == "kmeans" else "hamming"

    scores: dict[int, float] = {}
    best_k, best_score = None, -np.inf
    for k in ks:
        child_seed = Rng(seed).derive("select_k", k).next_u64()
        model = fit(x, k, child_seed, max_iter)
        result = silhouette(
            x, model.assignments, metric=metric, seed=Rng(seed).derive("sil", k).next_u64()
        )
        scores[k] = result.mean_sc
        logger.debug("select_k: k=%d mean silhouette %.4f", k, result.mean_sc)
        if result.mean_sc > best_score:  # strict: ties keep the smaller k
            best_k, best_score = k, result.mean_sc
    assert best_k is not None
    return best_k, scores


def cluster_users(
    users: Sequence[str],
    profiles: np.ndarray,
    k: int,
    method: str = "kmeans",
    seed: int = 0,
    max_iter: int = 100,
) -> tuple[dict[str, int], ClusterModel]:
    """Cluster per-user profile rows, canonicalizing order first.

    Rows are sorted by user id before seeding, so the resulting user ->
    cluster mapping is invariant to the input row order (for a fixed seed).
    """
    users = list(users)
    if len(users) != len(set(users)):
        raise ValueError("duplicate user ids in profile rows")
    profiles = np.asarray(profiles)
    order = np.argsort(np.asarray(users, dtype=object), kind="stable")
    sorted_users = [users[i] for i in order]
    fit = kmeans_fit if method == "kmeans" else kmodes_fit
    model = fit(profiles[order], k, seed, max_iter)
    mapping = {u: int(c) for u, c in zip(sorted_users, model.assignments)}
    return mapping, model
