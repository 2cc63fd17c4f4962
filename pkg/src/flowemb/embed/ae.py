"""Feed-forward autoencoder over individual window vectors."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..numkernel import Param, Rng, Tape, grad
from ..numkernel import autodiff as ad
from .config import EmbedderConfig
from .optim import Adam

logger = logging.getLogger(__name__)


@dataclass
class AeModel:
    """Single hidden layer autoencoder: tanh bottleneck, linear output."""

    w1: Param  # (p, d)
    b1: Param  # (p,)
    w2: Param  # (d, p)
    b2: Param  # (d,)
    config: EmbedderConfig
    loss_history: list[float] = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.w1.value.shape[1]

    @property
    def p(self) -> int:
        return self.w1.value.shape[0]

    def params(self) -> list[Param]:
        return [self.w1, self.b1, self.w2, self.b2]


def _batch_loss(model: AeModel, tape: Tape, x: np.ndarray):
    """Mean squared reconstruction error per element on one batch."""
    xin = tape.input(x)
    hidden = ad.tanh(ad.add_bias(ad.linear(xin, tape.param(model.w1)), tape.param(model.b1)))
    xhat = ad.add_bias(ad.linear(hidden, tape.param(model.w2)), tape.param(model.b2))
    total = ad.sum_sq(ad.sub(xhat, xin))
    return ad.scale(total, 1.0 / x.size)


def ae_fit(x: np.ndarray, config: EmbedderConfig) -> AeModel:
    """Train an autoencoder on the rows of ``x``.

    Deterministic for a fixed config: initialisation and batch order are
    drawn from the same seeded generator. ``loss_history`` records the mean
    per-element squared error of each epoch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D row matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    n, d = x.shape
    p = config.p
    rng = Rng(config.seed).derive("ae")
    bound = 1.0 / math.sqrt(p)
    model = AeModel(
        w1=Param(rng.uniform_array((p, d), -bound, bound), name="w1"),
        b1=Param(np.zeros(p), name="b1"),
        w2=Param(rng.uniform_array((d, p), -bound, bound), name="w2"),
        b2=Param(np.zeros(d), name="b2"),
        config=config,
    )
    optimizer = Adam(model.params(), learning_rate=config.learning_rate)
    order = np.arange(n)
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        epoch_sq = 0.0
        for start in range(0, n, config.batch_size):
            batch = x[order[start : start + config.batch_size]]
            tape = Tape()
            loss = _batch_loss(model, tape, batch)
            value = float(loss.value)
            if not math.isfinite(value):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (loss={value}); "
                    "consider lowering the learning rate"
                )
            epoch_sq += value * batch.size
            optimizer.step(grad(tape, loss))
        model.loss_history.append(epoch_sq / x.size)
    logger.debug(
        "autoencoder fit: n=%d d=%d p=%d final loss %.6f",
        n, d, p, model.loss_history[-1],
    )
    return model


def ae_encode(model: AeModel, x: np.ndarray) -> np.ndarray:
    """Hidden-layer activations for one vector (1-D) or a row matrix (2-D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.d:
        raise ValueError(f"expected {model.d} features, got {x.shape[-1]}")
    return np.tanh(x @ model.w1.value.T + model.b1.value)
