"""Adam optimizer operating on mutable parameter arrays."""
from __future__ import annotations

import numpy as np

from ..numkernel import Param


class Adam:
    """Adaptive-moment gradient descent with bias correction.

    Keeps first/second moment estimates per parameter and updates the
    parameter arrays in place.
    """

    def __init__(
        self,
        params: list[Param],
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.params = list(params)
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = {id(p): np.zeros_like(p.value) for p in self.params}
        self._v = {id(p): np.zeros_like(p.value) for p in self.params}

    def step(self, grads: dict[Param, np.ndarray]) -> None:
        """Apply one update using the gradients returned by ``grad``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for p in self.params:
            g = grads.get(p)
            if g is None:
                continue
            m = self._m[id(p)]
            v = self._v[id(p)]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.value -= self.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
