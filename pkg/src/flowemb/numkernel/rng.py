"""Deterministic random number generation.

The generator is a splitmix64 counter: a fixed 64-bit update with a
documented finalizer, so the stream produced by a given seed is identical
on every platform and numpy/BLAS build. All stochastic behaviour in the
package (init, shuffles, sampling, synthesis) flows through this class.
"""
from __future__ import annotations

import hashlib
import math
from typing import Sequence, TypeVar

import numpy as np

__all__ = ["Rng"]

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

T = TypeVar("T")


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def _key_to_int(key: int | str) -> int:
    if isinstance(key, int):
        return key & _MASK
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Seeded splitmix64 stream with the handful of draws the package needs."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix(self._state)

    def derive(self, *keys: int | str) -> "Rng":
        """Independent child stream, deterministic in (seed, keys).

        Used to give each (k value, cluster, stage, ...) its own stream so
        consumption order in one component never perturbs another.
        """
        state = self._state
        for key in keys:
            state = _mix((state ^ _key_to_int(key)) & _MASK)
        return Rng(state)

    # -- scalar draws ---------------------------------------------------
    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * self.random()

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        """Box-Muller transform; consumes two uniforms per draw."""
        u1 = self.random()
        u2 = self.random()
        while u1 <= 0.0:  # avoid log(0); probability 2^-53 per draw
            u1 = self.random()
        r = math.sqrt(-2.0 * math.log(u1))
        return mu + sigma * r * math.cos(2.0 * math.pi * u2)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (unbiased)."""
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        limit = _MASK - (_MASK % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    # -- array draws ----------------------------------------------------
    def uniform_array(self, shape: tuple[int, ...], low: float, high: float) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        flat = np.empty(size)
        for i in range(size):
            flat[i] = self.uniform(low, high)
        return flat.reshape(shape)

    def normal_array(self, shape: tuple[int, ...], mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
        size = int(np.prod(shape)) if shape else 1
        flat = np.empty(size)
        for i in range(size):
            flat[i] = self.normal(mu, sigma)
        return flat.reshape(shape)

    # -- collections ------------------------------------------------------
    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, items: Sequence[T], k: int) -> list[T]:
        """k distinct items, order randomized, without replacement."""
        if k > len(items):
            raise ValueError(f"cannot sample {k} items from {len(items)}")
        pool = list(items)
        self.shuffle(pool)
        return pool[:k]

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValueError("choice from an empty sequence")
        return items[self.randint(len(items))]

    def weighted_choice(self, weights: Sequence[float]) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = float(sum(weights))
        if total <= 0.0:
            raise ValueError("weighted_choice requires positive total weight")
        u = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1
