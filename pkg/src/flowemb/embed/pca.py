"""Linear projection baseline: principal components of window vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numkernel import Matrix, sym_eig


@dataclass
class PcaModel:
    """Top principal directions of a set of window vectors.

    ``components`` has one unit-length direction per column, ordered by
    decreasing explained variance; ``eigenvalues`` are the matching
    variances.
    """

    mean: np.ndarray  # (d,)
    components: np.ndarray  # (d, p)
    eigenvalues: np.ndarray  # (p,)

    @property
    def p(self) -> int:
        return self.components.shape[1]


def pca_fit(x: np.ndarray, p: int) -> PcaModel:
    """Fit a ``p``-dimensional projection to rows of ``x``.

    Uses the population covariance (normalised by the number of rows) and
    the symmetric eigensolver, so results are deterministic up to the
    solver's sign convention.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D row matrix, got shape {x.shape}")
    n, d = x.shape
    if not 1 <= p <= d:
        raise ValueError(f"p must be in 1..{d}, got {p}")
    if n < d:
        raise ValueError(f"need at least d={d} rows to fit, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / n
    cov = 0.5 * (cov + cov.T)  # clip asymmetry from floating-point roundoff
    eigenvalues, eigenvectors = sym_eig(Matrix(cov))
    return PcaModel(
        mean=mean,
        components=eigenvectors.array[:, :p].copy(),
        eigenvalues=np.asarray(eigenvalues[:p], dtype=np.float64),
    )


def pca_encode(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project one vector (1-D) or a row matrix (2-D) onto the components."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(
            f"expected {model.mean.shape[0]} features, got {x.shape[-1]}"
        )
    return (x - model.mean) @ model.components


def pca_reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Map encodings back to the original feature space."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != model.p:
        raise ValueError(f"expected {model.p} components, got {z.shape[-1]}")
    return z @ model.components.T + model.mean
