from __future__ import annotations

import numpy as np
import pytest

from flowemb.numkernel import Rng


def test_same_seed_same_stream() -> None:
    a = Rng(1234)
    b = Rng(1234)
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_different_seeds_diverge() -> None:
    assert Rng(1).next_u64() != Rng(2).next_u64()


def test_known_first_draw_is_stable() -> None:
    # Pin the stream so accidental algorithm changes are caught: splitmix64
    # of seed 0 starts with the mix of the golden-ratio increment.
    assert Rng(0).next_u64() == 0xE220A8397B1DCDAF


def test_derive_gives_independent_streams() -> None:
    base = Rng(42)
    s1 = base.derive("clustering", 2)
    s2 = base.derive("clustering", 3)
    s1_again = Rng(42).derive("clustering", 2)
    seq1 = [s1.next_u64() for _ in range(10)]
    assert seq1 == [s1_again.next_u64() for _ in range(10)]
    assert seq1 != [s2.next_u64() for _ in range(10)]


def test_random_in_unit_interval() -> None:
    rng = Rng(7)
    draws = [rng.random() for _ in range(10_000)]
    assert all(0.0 <= x < 1.0 for x in draws)
    assert abs(np.mean(draws) - 0.5) < 0.02


def test_uniform_respects_bounds() -> None:
    rng = Rng(8)
    draws = [rng.uniform(-2.0, 3.0) for _ in range(5_000)]
    assert min(draws) >= -2.0 and max(draws) < 3.0


def test_normal_moments() -> None:
    rng = Rng(9)
    draws = np.array([rng.normal() for _ in range(20_000)])
    assert abs(draws.mean()) < 0.03
    assert abs(draws.std() - 1.0) < 0.03


def test_randint_bounds_and_coverage() -> None:
    rng = Rng(10)
    draws = [rng.randint(5) for _ in range(2_000)]
    assert set(draws) == {0, 1, 2, 3, 4}
    with pytest.raises(ValueError):
        rng.randint(0)


def test_shuffle_is_a_permutation() -> None:
    rng = Rng(11)
    items = list(range(50))
    shuffled = items.copy()
    rng.shuffle(shuffled)
    assert sorted(shuffled) == items
    assert shuffled != items  # astronomically unlikely to be identity


def test_sample_without_replacement() -> None:
    rng = Rng(12)
    picked = rng.sample(range(20), 8)
    assert len(picked) == len(set(picked)) == 8
    with pytest.raises(ValueError):
        rng.sample(range(3), 4)


def test_weighted_choice_tracks_weights() -> None:
    rng = Rng(13)
    draws = [rng.weighted_choice([0.9, 0.1]) for _ in range(2_000)]
    frac = sum(draws) / len(draws)
    assert 0.05 < frac < 0.15


def test_array_draws_fill_in_stream_order() -> None:
    a = Rng(14).uniform_array((2, 3), -1.0, 1.0)
    flat = Rng(14)
    expected = [flat.uniform(-1.0, 1.0) for _ in range(6)]
    assert a.shape == (2, 3)
    assert np.allclose(a.reshape(-1), expected)
