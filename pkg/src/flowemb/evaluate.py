"""Train/test splitting over users, precision-recall evaluation, and
projection export of representation snapshots.

The curve area is average precision computed block-wise over distinct score
values (equal scores form one threshold), accumulated in plain Python so
results are reproducible to the bit against a brute-force sweep.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .embed import pca_encode, pca_fit
from .numkernel import Rng

logger = logging.getLogger(__name__)

NORMAL = "normal"
ANOMALOUS = "anomalous"


# ---------------------------------------------------------------------------
# user splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Split:
    """Disjoint per-cluster user lists; a user's weeks never straddle sides."""

    train: dict[int, list[str]]
    test: dict[int, list[str]]
    ratio: float
    seed: int

    def side_of(self, cluster: int, user_id: str) -> str:
        if user_id in self.test.get(cluster, ()):
            return "test"
        if user_id in self.train.get(cluster, ()):
            return "train"
        raise KeyError(f"user {user_id!r} not in cluster {cluster}")


def split_users(
    users_by_cluster: Mapping[int, Sequence[str]],
    ratio: float = 0.15,
    seed: int = 0,
) -> Split:
    """Seeded per-cluster holdout of users (not weeks).

    Test size is ``round(ratio * n)`` with a floor of one user, capped so at
    least one user always remains in train. A single-user cluster keeps its
    user in train and logs a warning. Labels play no part here.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"ratio must be in [0, 1), got {ratio}")
    train: dict[int, list[str]] = {}
    test: dict[int, list[str]] = {}
    for cluster in sorted(users_by_cluster):
        users = sorted(users_by_cluster[cluster])
        if len(users) != len(set(users)):
            raise ValueError(f"cluster {cluster} lists duplicate users")
        if len(users) < 2:
            logger.warning(
                "cluster %d has %d user(s); keeping all in train", cluster, len(users)
            )
            train[cluster] = users
            test[cluster] = []
            continue
        rng = Rng(seed).derive("split", cluster)
        shuffled = list(users)
        rng.shuffle(shuffled)
        n_test = min(max(1, round(ratio * len(users))), len(users) - 1)
        test[cluster] = sorted(shuffled[:n_test])
        train[cluster] = sorted(shuffled[n_test:])
    return Split(train=train, test=test, ratio=ratio, seed=seed)


# ---------------------------------------------------------------------------
# precision-recall
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrPoint:
    threshold: float
    precision: float
    recall: float


@dataclass(frozen=True)
class PrCurve:
    points: tuple[PrPoint, ...]
    area: float


def _is_positive(label: object) -> bool:
    if isinstance(label, bool):
        return label
    if label == ANOMALOUS:
        return True
    if label == NORMAL:
        return False
    raise ValueError(f"label must be {NORMAL!r} or {ANOMALOUS!r}, got {label!r}")


def pr_curve(scores: Sequence[float], labels: Sequence[object]) -> PrCurve:
    """Precision/recall swept over distinct score values, descending.

    Equal scores are one threshold. The area is average precision:
    sum over blocks of precision * (new true positives), divided by the
    positive count.
    """
    if len(scores) != len(labels):
        raise ValueError(f"got {len(scores)} scores for {len(labels)} labels")
    if not scores:
        raise ValueError("cannot evaluate an empty score list")
    positives = [_is_positive(l) for l in labels]
    total_pos = sum(positives)
    if total_pos == 0:
        raise ValueError("no anomalous examples: recall is undefined")
    if total_pos == len(scores):
        raise ValueError("no normal examples: precision sweep is degenerate")
    values = [float(s) for s in scores]
    if not all(np.isfinite(values)):
        raise ValueError("scores contain non-finite values")

    order = sorted(range(len(values)), key=lambda i: -values[i])
    points: list[PrPoint] = []
    tp = 0
    fp = 0
    area_sum = 0.0
    i = 0
    while i < len(order):
        threshold = values[order[i]]
        new_tp = 0
        j = i
        while j < len(order) and values[order[j]] == threshold:
            if positives[order[j]]:
                new_tp += 1
            j += 1
        new_fp = (j - i) - new_tp
        tp += new_tp
        fp += new_fp
        precision = tp / (tp + fp)
        recall = tp / total_pos
        area_sum += precision * new_tp
        points.append(PrPoint(threshold, precision, recall))
        i = j
    return PrCurve(points=tuple(points), area=area_sum / total_pos)


def write_pr_curve(
    path: str | Path, curve: PrCurve, comments: Mapping[str, object] | None = None
) -> None:
    """CSV of (threshold, precision, recall) with `# key=value` header lines."""
    lines = [f"# {k}={v}" for k, v in (comments or {}).items()]
    lines.append(f"# area={curve.area!r}")
    lines.append("threshold,precision,recall")
    for pt in curve.points:
        lines.append(f"{pt.threshold!r},{pt.precision!r},{pt.recall!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# representation-evolution export
# ---------------------------------------------------------------------------

def scatter_export(
    snapshots: Mapping[int, np.ndarray],
    labels: Sequence[str],
    out_dir: str | Path,
    prefix: str = "scatter",
    comments: Mapping[str, object] | None = None,
) -> list[Path]:
    """Write one 2-D CSV per snapshot epoch: columns x, y, label.

    Axes are fixed across epochs: a 2-component projection is fitted on the
    latest epoch's representations and applied to all of them, so motion
    between files reflects training progress rather than axis churn. Inputs
    with fewer than 2 dimensions are emitted as-is (y = 0). If there are too
    few rows to fit the projection, the first two dimensions are exported
    unrotated.
    """
    if not snapshots:
        raise ValueError("no snapshots to export")
    epochs = sorted(snapshots)
    final = np.asarray(snapshots[epochs[-1]], dtype=np.float64)
    if final.ndim != 2:
        raise ValueError(f"snapshot must be 2-D, got shape {final.shape}")
    n, p = final.shape
    if len(labels) != n:
        raise ValueError(f"got {len(labels)} labels for {n} rows")
    for epoch in epochs:
        if np.asarray(snapshots[epoch]).shape != (n, p):
            raise ValueError(f"snapshot shapes differ at epoch {epoch}")

    if p < 2:
        def project(z: np.ndarray) -> np.ndarray:
            out = np.zeros((z.shape[0], 2))
            out[:, 0] = z[:, 0] if p == 1 else 0.0
            return out
    elif n <= p:
        logger.warning(
            "only %d rows for %d dims; exporting first two dimensions", n, p
        )
        def project(z: np.ndarray) -> np.ndarray:
            return z[:, :2]
    else:
        model = pca_fit(final, 2)
        def project(z: np.ndarray) -> np.ndarray:
            return pca_encode(model, z)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for epoch in epochs:
        xy = project(np.asarray(snapshots[epoch], dtype=np.float64))
        lines = [f"# {k}={v}" for k, v in (comments or {}).items()]
        lines.append(f"# epoch={epoch}")
        lines.append("x,y,label")
        for row, label in zip(xy, labels):
            lines.append(f"{float(row[0])!r},{float(row[1])!r},{label}")
        path = out_dir / f"{prefix}_epoch{epoch:03d}.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    return written
