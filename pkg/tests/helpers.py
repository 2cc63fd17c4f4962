"""Shared test oracles.

The gradient checker here is the independent reference for every
backpropagation result in the package: central finite differences with a
fixed step, compared entry-by-entry under a guarded relative error.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from flowemb.numkernel import Param, Tape, Var, grad

FD_STEP = 1e-5
FD_TOLERANCE = 1e-4


def finite_difference_gradients(
    params: Sequence[Param],
    build_loss: Callable[[Tape], Var],
    step: float = FD_STEP,
) -> dict[Param, np.ndarray]:
    """Central-difference gradient of the loss w.r.t. each parameter entry.

    ``build_loss`` must rebuild the forward computation from scratch on the
    tape it is handed, reading the current parameter values.
    """
    numeric: dict[Param, np.ndarray] = {}
    for p in params:
        out = np.zeros_like(p.value)
        flat_value = p.value.reshape(-1)
        flat_out = out.reshape(-1)
        for i in range(flat_value.size):
            original = flat_value[i]
            flat_value[i] = original + step
            loss_plus = float(build_loss(Tape()).value)
            flat_value[i] = original - step
            loss_minus = float(build_loss(Tape()).value)
            flat_value[i] = original
            flat_out[i] = (loss_plus - loss_minus) / (2.0 * step)
        numeric[p] = out
    return numeric


def max_relative_error(
    analytic: dict[Param, np.ndarray], numeric: dict[Param, np.ndarray]
) -> float:
    """Worst-case |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).

    The 1e-6 floor keeps finite-difference noise on near-zero gradients from
    registering as a relative blow-up.
    """
    worst = 0.0
    for p, a in analytic.items():
        n = numeric[p]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)) if a.size else 0.0)
    return worst


def check_gradients(
    params: Sequence[Param],
    build_loss: Callable[[Tape], Var],
    tolerance: float = FD_TOLERANCE,
) -> float:
    """Run analytic-vs-numeric comparison; returns the max relative error."""
    tape = Tape()
    loss = build_loss(tape)
    analytic = grad(tape, loss)
    numeric = finite_difference_gradients(params, build_loss)
    err = max_relative_error(
        {p: analytic[p] for p in params}, numeric
    )
    assert err < tolerance, f"gradient mismatch: max relative error {err:.3e}"
    return err
