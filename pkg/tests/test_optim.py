"""Tests for the Adam optimizer."""
from __future__ import annotations

import numpy as np
import pytest

from flowemb.embed import Adam
from flowemb.numkernel import Param


def test_single_step_matches_hand_computation() -> None:
    theta = Param(np.array([1.0, -2.0]), "theta")
    g = np.array([0.5, -0.25])
    opt = Adam([theta], learning_rate=0.1)
    opt.step({theta: g})
    # After one step the bias-corrected moments reduce to m_hat = g and
    # v_hat = g^2, so the update is lr * g / (|g| + eps).
    expected = np.array([1.0, -2.0]) - 0.1 * g / (np.abs(g) + 1e-8)
    assert np.allclose(theta.value, expected, atol=1e-12)


def test_converges_on_quadratic() -> None:
    theta = Param(np.array(10.0), "theta")
    opt = Adam([theta], learning_rate=0.1)
    for _ in range(500):
        opt.step({theta: np.asarray(2.0 * (theta.value - 3.0))})
    assert float(theta.value) == pytest.approx(3.0, abs=1e-3)


def test_param_without_gradient_is_untouched() -> None:
    a = Param(np.ones(3), "a")
    b = Param(np.ones(3), "b")
    opt = Adam([a, b], learning_rate=0.5)
    opt.step({a: np.ones(3)})
    assert not np.array_equal(a.value, np.ones(3))
    assert np.array_equal(b.value, np.ones(3))


def test_rejects_bad_learning_rate() -> None:
    with pytest.raises(ValueError, match="learning_rate"):
        Adam([], learning_rate=-1.0)
