"""Power map: exact entrywise behaviour and linear-response agreement."""

import numpy as np
import pytest

from emspec import Deformation, linear_response_map, power_map


def random_symmetric(n, rng, low=0.01, high=1.0):
    magnitudes = rng.uniform(low, high, size=(n, n))
    signs = rng.choice([-1.0, 1.0], size=(n, n))
    m = magnitudes * signs
    return np.triu(m) + np.triu(m, 1).T


def test_exponent_below_one_rejected():
    with pytest.raises(ValueError):
        Deformation(0.5)
    with pytest.raises(ValueError):
        Deformation(float("nan"))


def test_q_one_is_exact_identity():
    rng = np.random.default_rng(0)
    c = random_symmetric(6, rng)
    out = power_map(c, Deformation(1.0))
    assert np.array_equal(out, c)
    assert out is not c


def test_entrywise_values():
    c = np.array([[1.0, -0.25], [-0.25, 1.0]])
    out = power_map(c, Deformation(2.0))
    assert out[0, 1] == -0.0625
    assert out[0, 0] == 1.0


def test_fixed_points():
    c = np.array([[1.0, 0.0, -1.0],
                  [0.0, 1.0, 1.0],
                  [-1.0, 1.0, 1.0]])
    for q in (1.3, 2.0, 3.7):
        assert np.array_equal(power_map(c, Deformation(q)), c)


def test_sign_and_magnitude_ordering():
    rng = np.random.default_rng(1)
    small = random_symmetric(8, rng, low=0.01, high=0.99)
    large = random_symmetric(8, rng, low=1.01, high=3.0)
    for q in (1.1, 2.0):
        ps = power_map(small, Deformation(q))
        pl = power_map(large, Deformation(q))
        assert np.array_equal(np.sign(ps), np.sign(small))
        assert np.all(np.abs(ps) <= np.abs(small))
        assert np.all(np.abs(pl) >= np.abs(large))


def test_symmetry_bit_exact():
    rng = np.random.default_rng(2)
    c = random_symmetric(12, rng)
    out = power_map(c, Deformation(1.37))
    assert np.array_equal(out, out.T)


def test_linear_response_identity_and_zeros():
    c = np.array([[1.0, 0.0], [0.0, 0.25]])
    assert np.array_equal(linear_response_map(c, 0.0), c)
    out = linear_response_map(c, 0.5)
    assert out[0, 1] == 0.0
    assert np.all(np.isfinite(out))


def test_linear_response_known_value():
    c = np.array([[1.0, 0.5], [0.5, 1.0]])
    out = linear_response_map(c, 0.001)
    expected = 0.5 + 0.0005 * 0.5 * np.log(0.25)
    assert out[0, 1] == pytest.approx(expected, rel=1e-12)
    mapped = power_map(c, Deformation(1.001))
    # quadratic remainder: |exact - linear| = O(alpha^2 * x ln^2(x^2))
    assert abs(mapped[0, 1] - out[0, 1]) <= 10 * 1e-6 * 0.5 * np.log(0.25) ** 2


@pytest.mark.parametrize("alpha", [1e-5, 1e-4, 1e-3])
def test_exact_vs_linear_second_order_bound(alpha):
    rng = np.random.default_rng(3)
    c = random_symmetric(16, rng, low=0.01, high=1.0)
    exact = power_map(c, Deformation(1.0 + alpha))
    linear = linear_response_map(c, alpha)
    bound = 10 * alpha ** 2 * np.max(np.abs(c * np.log(c * c) ** 2))
    assert np.max(np.abs(exact - linear)) <= bound


def test_trace_matches_correction_sum(woe_256x128_run):
    splits = woe_256x128_run.splits
    s = splits[0]
    n = s.n
    assert s.corrections.sum() == pytest.approx(
        s.deformed_values.sum() - s.base_values.sum(), abs=1e-10 * n)
