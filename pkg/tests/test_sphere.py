import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslab import sphere


@pytest.mark.parametrize("d, expected, tol", [(2, 2 * math.pi, 1e-12), (3, 4 * math.pi, 1e-12), (7, 33.073, 1e-3)])
def test_surface_area(d, expected, tol):
    assert sphere.surface_area(d) == pytest.approx(expected, abs=tol)


def test_surface_area_peaks_at_seven():
    areas = [sphere.surface_area(d) for d in range(2, 30)]
    assert int(np.argmax(areas)) + 2 == 7


def test_sampling_reproducible_and_unit():
    a = sphere.sample_sphere(5, np.random.default_rng(3), 10)
    b = sphere.sample_sphere(5, np.random.default_rng(3), 10)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1, atol=1e-12)
    assert sphere.sample_sphere(3, np.random.default_rng(0)).shape == (3,)


def test_sampling_moments():
    x = sphere.sample_sphere(5, np.random.default_rng(11), 100_000)
    assert abs(x[:, 0].mean()) < 0.01
    assert abs((x[:, 0] ** 2).mean() - 0.2) < 0.01


@pytest.mark.parametrize("d, k, expected", [(2, 1, 0.5), (3, 1, 1 / 3), (3, 2, 0.2), (10, 1, 0.1)])
def test_pair_moment_examples(d, k, expected):
    assert sphere.pair_moment_exact(d, k) == pytest.approx(expected, rel=1e-12)
    assert sphere.pair_moment_factorial(d, k) == pytest.approx(expected, rel=1e-12)


@given(st.integers(2, 10_000), st.integers(0, 60))
def test_beta_equals_factorial(d, k):
    a, b = sphere.pair_moment_exact(d, k), sphere.pair_moment_factorial(d, k)
    assert a == pytest.approx(b, rel=1e-10)
    assert a <= 1


def test_monotone_decay():
    for d in (2, 3, 5, 10, 50):
        vals = [sphere.pair_moment_exact(d, k) for k in range(21)]
        assert all(x > y for x, y in zip(vals, vals[1:]))
    for k in range(1, 21):
        vals = [sphere.pair_moment_exact(d, k) for d in (2, 3, 5, 10, 50)]
        assert all(x > y for x, y in zip(vals, vals[1:]))


@pytest.mark.parametrize("d, k", [(3, 1), (10, 3)])
def test_pair_moment_mc(d, k):
    est, se = sphere.pair_moment_mc(d, k, 100_000, np.random.default_rng(17))
    assert abs(est - sphere.pair_moment_exact(d, k)) <= 3 * se


def test_pair_moment_mc_k0():
    assert sphere.pair_moment_mc(4, 0, 1000, np.random.default_rng(0)) == (1.0, 0.0)


def test_validation():
    with pytest.raises(ValueError):
        sphere.surface_area(1)
    with pytest.raises(ValueError):
        sphere.pair_moment_exact(3, -1)
    with pytest.raises(ValueError):
        sphere.pair_moment_mc(3, 1, 10, np.random.default_rng(0))
