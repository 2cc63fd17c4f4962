"""Reverse-mode automatic differentiation over a recorded operation tape.

The engine is intentionally small: values are float64 numpy arrays, a
``Tape`` records every produced ``Var`` in execution order (which is a
topological order by construction), and ``grad`` replays the records in
reverse, accumulating vector-Jacobian products. Only the operations the
sequence models actually need are provided.

Leaves come in two kinds: ``Param`` (tracked; receives a gradient, zero if
the loss does not depend on it) and plain inputs (untracked; never appears
in the gradient mapping).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Param",
    "Tape",
    "Var",
    "grad",
    "add",
    "add_n",
    "sub",
    "mul",
    "scale",
    "add_bias",
    "linear",
    "matvec",
    "tanh",
    "sigmoid",
    "softmax_rows",
    "slice_cols",
    "stack_cols",
    "weighted_sum",
    "sum_sq",
]


class Param:
    """A named, mutable parameter array that persists across tapes."""

    __slots__ = ("value", "name")

    def __init__(self, value: np.ndarray, name: str = ""):
        self.value = np.asarray(value, dtype=np.float64)
        self.name = name

    def __repr__(self) -> str:
        return f"Param({self.name or 'unnamed'}, shape={self.value.shape})"


class Var:
    """A value recorded on a tape."""

    __slots__ = ("tape", "value", "parents", "vjp", "tracked")

    def __init__(
        self,
        tape: "Tape",
        value: np.ndarray,
        parents: tuple["Var", ...],
        vjp: Callable[[np.ndarray], tuple] | None,
        tracked: bool,
    ):
        self.tape = tape
        self.value = value
        self.parents = parents
        self.vjp = vjp
        self.tracked = tracked

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape


class Tape:
    """Records operations so their gradients can be replayed in reverse."""

    def __init__(self):
        self._nodes: list[Var] = []
        self._param_vars: dict[int, tuple[Param, Var]] = {}

    def _record(
        self,
        value: np.ndarray,
        parents: tuple[Var, ...],
        vjp: Callable[[np.ndarray], tuple] | None,
        tracked: bool,
    ) -> Var:
        var = Var(self, value, parents, vjp, tracked)
        self._nodes.append(var)
        return var

    def param(self, p: Param) -> Var:
        """Lift a parameter onto the tape (idempotent per tape)."""
        entry = self._param_vars.get(id(p))
        if entry is not None:
            return entry[1]
        var = self._record(p.value, (), None, tracked=True)
        self._param_vars[id(p)] = (p, var)
        return var

    def input(self, value: np.ndarray | float) -> Var:
        """An untracked leaf: data flows forward, no gradient is reported."""
        return self._record(np.asarray(value, dtype=np.float64), (), None, tracked=False)


def grad(tape: Tape, loss: Var) -> dict[Param, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter lifted onto the tape.

    Tracked parameters the loss does not reach get a zero gradient;
    untracked leaves are absent from the result entirely.
    """
    if loss.tape is not tape:
        raise ValueError("loss is not recorded on this tape")
    if loss.value.shape != ():
        raise ValueError(f"loss must be a scalar, got shape {loss.value.shape}")

    adjoint: dict[int, np.ndarray] = {id(loss): np.ones(())}
    for var in reversed(tape._nodes):
        g = adjoint.get(id(var))
        if g is None or var.vjp is None:
            continue
        for parent, pg in zip(var.parents, var.vjp(g)):
            if pg is None or not parent.tracked:
                continue
            acc = adjoint.get(id(parent))
            adjoint[id(parent)] = pg if acc is None else acc + pg

    return {
        p: adjoint.get(id(var), np.zeros_like(p.value))
        for p, var in tape._param_vars.values()
    }


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _same_tape(*vars_: Var) -> Tape:
    tape = vars_[0].tape
    for v in vars_[1:]:
        if v.tape is not tape:
            raise ValueError("operands were recorded on different tapes")
    return tape


def _require_shape(v: Var, ndim: int, what: str) -> None:
    if v.value.ndim != ndim:
        raise ValueError(f"{what} expects a {ndim}-D operand, got shape {v.value.shape}")


def add(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    return tape._record(a.value + b.value, (a, b), lambda g: (g, g), a.tracked or b.tracked)


def add_n(vs: Sequence[Var]) -> Var:
    if not vs:
        raise ValueError("add_n of an empty sequence")
    tape = _same_tape(*vs)
    shape = vs[0].value.shape
    for v in vs[1:]:
        if v.value.shape != shape:
            raise ValueError(f"add_n shape mismatch: {shape} vs {v.value.shape}")
    total = vs[0].value.copy()
    for v in vs[1:]:
        total += v.value
    n = len(vs)
    return tape._record(total, tuple(vs), lambda g: (g,) * n, any(v.tracked for v in vs))


def sub(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")
    return tape._record(a.value - b.value, (a, b), lambda g: (g, -g), a.tracked or b.tracked)


def mul(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    av, bv = a.value, b.value
    return tape._record(
        av * bv,
        (a, b),
        lambda g: (g * bv if a.tracked else None, g * av if b.tracked else None),
        a.tracked or b.tracked,
    )


def scale(a: Var, c: float) -> Var:
    return a.tape._record(a.value * c, (a,), lambda g: (g * c,), a.tracked)


def add_bias(m: Var, b: Var) -> Var:
    """Row-broadcast add: (B, n) + (n,) -> (B, n)."""
    tape = _same_tape(m, b)
    _require_shape(m, 2, "add_bias matrix")
    _require_shape(b, 1, "add_bias bias")
    if m.value.shape[1] != b.value.shape[0]:
        raise ValueError(
            f"add_bias width mismatch: matrix {m.value.shape}, bias {b.value.shape}"
        )
    return tape._record(
        m.value + b.value[None, :],
        (m, b),
        lambda g: (g, g.sum(axis=0) if b.tracked else None),
        m.tracked or b.tracked,
    )


def linear(x: Var, w: Var) -> Var:
    """Affine core: (B, n) @ (m, n)^T -> (B, m)."""
    tape = _same_tape(x, w)
    _require_shape(x, 2, "linear input")
    _require_shape(w, 2, "linear weight")
    if x.value.shape[1] != w.value.shape[1]:
        raise ValueError(
            f"linear width mismatch: input {x.value.shape}, weight {w.value.shape}"
        )
    xv, wv = x.value, w.value
    return tape._record(
        xv @ wv.T,
        (x, w),
        lambda g: (g @ wv if x.tracked else None, g.T @ xv if w.tracked else None),
        x.tracked or w.tracked,
    )


def matvec(m: Var, v: Var) -> Var:
    """(B, p) @ (p,) -> (B,)."""
    tape = _same_tape(m, v)
    _require_shape(m, 2, "matvec matrix")
    _require_shape(v, 1, "matvec vector")
    if m.value.shape[1] != v.value.shape[0]:
        raise ValueError(
            f"matvec width mismatch: matrix {m.value.shape}, vector {v.value.shape}"
        )
    mv, vv = m.value, v.value
    return tape._record(
        mv @ vv,
        (m, v),
        lambda g: (
            g[:, None] * vv[None, :] if m.tracked else None,
            mv.T @ g if v.tracked else None,
        ),
        m.tracked or v.tracked,
    )


def tanh(a: Var) -> Var:
    y = np.tanh(a.value)
    return a.tape._record(y, (a,), lambda g: (g * (1.0 - y * y),), a.tracked)


def sigmoid(a: Var) -> Var:
    # tanh form is overflow-safe for large |x| in float64.
    y = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return a.tape._record(y, (a,), lambda g: (g * y * (1.0 - y),), a.tracked)


def softmax_rows(a: Var) -> Var:
    """Row-wise stable softmax of a (B, N) matrix."""
    _require_shape(a, 2, "softmax_rows")
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    return a.tape._record(
        y,
        (a,),
        lambda g: (y * (g - (g * y).sum(axis=1, keepdims=True)),),
        a.tracked,
    )


def slice_cols(a: Var, j0: int, j1: int) -> Var:
    _require_shape(a, 2, "slice_cols")
    shape = a.value.shape

    def backward(g: np.ndarray) -> tuple:
        out = np.zeros(shape)
        out[:, j0:j1] = g
        return (out,)

    return a.tape._record(a.value[:, j0:j1].copy(), (a,), backward, a.tracked)


def stack_cols(vs: Sequence[Var]) -> Var:
    """Stack N vectors of shape (B,) into a (B, N) matrix."""
    if not vs:
        raise ValueError("stack_cols of an empty sequence")
    tape = _same_tape(*vs)
    for v in vs:
        _require_shape(v, 1, "stack_cols operand")
    value = np.stack([v.value for v in vs], axis=1)
    n = len(vs)
    return tape._record(
        value,
        tuple(vs),
        lambda g: tuple(g[:, j] for j in range(n)),
        any(v.tracked for v in vs),
    )


def weighted_sum(alpha: Var, hs: Sequence[Var]) -> Var:
    """Convex-ish combination sum_j alpha[:, j, None] * hs[j] -> (B, p).

    ``alpha`` is (B, N) and each of the N entries of ``hs`` is (B, p).
    """
    if not hs:
        raise ValueError("weighted_sum over an empty sequence")
    tape = _same_tape(alpha, *hs)
    _require_shape(alpha, 2, "weighted_sum weights")
    if alpha.value.shape[1] != len(hs):
        raise ValueError(
            f"weighted_sum arity mismatch: weights {alpha.value.shape}, {len(hs)} states"
        )
    stacked = np.stack([h.value for h in hs], axis=1)  # (B, N, p)
    av = alpha.value
    value = np.einsum("bn,bnp->bp", av, stacked)

    def backward(g: np.ndarray) -> tuple:
        d_alpha = np.einsum("bp,bnp->bn", g, stacked) if alpha.tracked else None
        d_hs = tuple(
            av[:, j, None] * g if h.tracked else None for j, h in enumerate(hs)
        )
        return (d_alpha, *d_hs)

    return tape._record(
        value, (alpha, *hs), backward, alpha.tracked or any(h.tracked for h in hs)
    )


def sum_sq(a: Var) -> Var:
    """Sum of squared entries, reduced to a scalar."""
    av = a.value
    return a.tape._record(
        np.asarray((av * av).sum()), (a,), lambda g: (2.0 * av * g,), a.tracked
    )
