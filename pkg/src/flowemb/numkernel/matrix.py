"""Dense matrix type and the small set of linear-algebra kernels the rest of
the package is built on.

Everything here is float64 and row-major. The heavy lifting (elementwise
arithmetic, products) is delegated to numpy; the eigensolver is a cyclic
Jacobi sweep implemented locally so that its ordering and sign conventions
are fully pinned down.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = ["Matrix", "matmul", "softmax", "sym_eig"]


class Matrix:
    """A 2-D array of finite float64 values, stored row-major.

    Thin wrapper over a C-contiguous numpy array. Construction validates
    shape and finiteness; every public kernel in this module re-validates
    its output, so a ``Matrix`` in hand always holds finite entries.
    """

    __slots__ = ("_a",)

    def __init__(self, values: np.ndarray | Sequence[Sequence[float]]):
        a = np.array(values, dtype=np.float64, order="C", copy=True)
        if a.ndim != 2:
            raise ValueError(f"Matrix requires 2-D input, got ndim={a.ndim}")
        if a.size and not np.isfinite(a).all():
            raise ValueError("Matrix entries must be finite")
        self._a = a

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(np.zeros((rows, cols)))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n))

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> "Matrix":
        return cls(np.array(list(rows), dtype=np.float64, ndmin=2))

    # -- accessors -----------------------------------------------------
    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape  # type: ignore[return-value]

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the entries (length rows*cols)."""
        return self._a.reshape(-1)

    @property
    def array(self) -> np.ndarray:
        """The underlying 2-D array (read it, don't mutate it)."""
        return self._a

    def transpose(self) -> "Matrix":
        return Matrix(self._a.T)

    def __getitem__(self, idx):
        return self._a[idx]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self._a.shape == other._a.shape and bool((self._a == other._a).all())

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"

    def allclose(self, other: "Matrix", atol: float = 1e-12) -> bool:
        return self._a.shape == other._a.shape and np.allclose(
            self._a, other._a, atol=atol, rtol=0.0
        )


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product ``a @ b``.

    Raises ValueError on inner-dimension mismatch, reporting both shapes.
    """
    if a.cols != b.rows:
        raise ValueError(
            f"matmul dimension mismatch: left is {a.rows}x{a.cols}, "
            f"right is {b.rows}x{b.cols}"
        )
    out = a.array @ b.array
    if out.size and not np.isfinite(out).all():
        raise ValueError("matmul produced non-finite entries")
    return Matrix(out)


def softmax(v: np.ndarray | Sequence[float]) -> np.ndarray:
    """Numerically stable softmax of a 1-D vector.

    The maximum entry is subtracted before exponentiation, so arbitrarily
    large (finite) inputs cannot overflow. Output entries are positive and
    sum to 1.
    """
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"softmax expects a 1-D vector, got ndim={x.ndim}")
    if x.size == 0:
        raise ValueError("softmax of an empty vector is undefined")
    if not np.isfinite(x).all():
        raise ValueError("softmax input must be finite")
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


def _off_diagonal_norm(a: np.ndarray) -> float:
    n = a.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return float(np.sqrt(np.sum(a[mask] ** 2)))


def sym_eig(s: Matrix, max_sweeps: int = 100) -> tuple[np.ndarray, Matrix]:
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the columns of the returned matrix,
    ordered to match. Each eigenvector is normalized so that its first
    component of non-negligible magnitude is positive, which makes the
    output deterministic up to degeneracy.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``1e-12 * max(1, ||S||_F)`` (a relative tolerance: an absolute 1e-12 is
    unreachable in float64 for large-norm inputs), or after ``max_sweeps``
    full passes.
    """
    if s.rows != s.cols:
        raise ValueError(f"sym_eig requires a square matrix, got {s.rows}x{s.cols}")
    a = s.array
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > 1e-10:
        raise ValueError(
            f"sym_eig requires a symmetric matrix (max |S - S^T| = {asym:.3e})"
        )

    n = s.rows
    a = 0.5 * (a + a.T)  # fold any sub-tolerance asymmetry away
    v = np.eye(n)
    scale = float(np.linalg.norm(a)) or 1.0
    tol = 1e-12 * max(1.0, scale)

    for _ in range(max_sweeps):
        if _off_diagonal_norm(a) < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-30 * scale:
                    continue
                # Classic two-sided Jacobi rotation annihilating a[p, q].
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(1.0 + theta * theta)
                )
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = t * c

                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - sn * vec_q
                v[:, q] = sn * vec_p + c * vec_q

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    v = v[:, order]

    # Sign convention: first component of non-negligible magnitude positive.
    for j in range(n):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col

    return eigenvalues, Matrix(v)
