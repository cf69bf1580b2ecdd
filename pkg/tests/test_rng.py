import numpy as np
import pytest

from freqmask.rng import child_rng, make_rng, sample_without_replacement, uniform


def test_uniform_degenerate_interval():
    rng = make_rng(0)
    assert uniform(rng, 3.0, 3.0) == 3.0


def test_uniform_rejects_inverted_interval():
    with pytest.raises(ValueError):
        uniform(make_rng(0), 2.0, 1.0)


def test_uniform_deterministic_per_seed():
    a = [uniform(make_rng(42), 0, 1) for _ in range(2)]
    r1, r2 = make_rng(42), make_rng(42)
    pair1 = (uniform(r1, 0, 1), uniform(r1, 0, 1))
    pair2 = (uniform(r2, 0, 1), uniform(r2, 0, 1))
    assert pair1 == pair2
    assert a[0] == a[1]


def test_uniform_mean_monte_carlo():
    rng = make_rng(123)
    draws = np.array([uniform(rng, 0.0, 1.0) for _ in range(100_000)])
    assert abs(draws.mean() - 0.5) < 0.01
    assert draws.min() >= 0.0 and draws.max() < 1.0


def test_sample_without_replacement_edges():
    rng = make_rng(0)
    assert sample_without_replacement(rng, 5, 0).size == 0
    assert list(sample_without_replacement(rng, 5, 5)) == [0, 1, 2, 3, 4]
    with pytest.raises(ValueError):
        sample_without_replacement(rng, 5, 6)


def test_sample_without_replacement_stable_across_runs():
    a = sample_without_replacement(make_rng(7), 16, 4)
    b = sample_without_replacement(make_rng(7), 16, 4)
    assert np.array_equal(a, b)
    assert len(set(a.tolist())) == 4
    assert a.min() >= 0 and a.max() < 16


def test_child_rng_independent_and_reproducible():
    x = child_rng(9, 1, 2).random(4)
    y = child_rng(9, 1, 2).random(4)
    z = child_rng(9, 1, 3).random(4)
    assert np.array_equal(x, y)
    assert not np.array_equal(x, z)
