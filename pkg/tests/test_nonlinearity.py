import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmnmf.nonlinearity import (
    DerivativeClampWarning,
    Nonlinearity,
    apply_f,
    apply_f_inv,
    apply_f_inv_deriv,
)

IDENT = Nonlinearity("identity")
SQRT = Nonlinearity("power", 0.5)
LOG = Nonlinearity("log1p")
FAMILY = [IDENT, SQRT, Nonlinearity("power", 0.3), Nonlinearity("power", 1.0), LOG]


def test_examples():
    np.testing.assert_array_equal(apply_f(IDENT, np.array([[2.0, 3.0]])), [[2.0, 3.0]])
    np.testing.assert_allclose(apply_f(SQRT, np.array([[4.0, 9.0]])), [[2.0, 3.0]], rtol=1e-15)
    np.testing.assert_allclose(apply_f(LOG, np.array([[math.e - 1]])), [[1.0]], rtol=1e-15)

    np.testing.assert_array_equal(apply_f_inv(IDENT, np.array([[5.0]])), [[5.0]])
    np.testing.assert_allclose(apply_f_inv(SQRT, np.array([[2.0, 3.0]])), [[4.0, 9.0]], rtol=1e-15)
    np.testing.assert_allclose(apply_f_inv(LOG, np.array([[1.0]])), [[math.e - 1]], rtol=1e-15)

    np.testing.assert_array_equal(apply_f_inv_deriv(IDENT, np.array([[0.0, 7.0]])), [[1.0, 1.0]])
    np.testing.assert_allclose(apply_f_inv_deriv(SQRT, np.array([[3.0]])), [[6.0]], rtol=1e-15)
    np.testing.assert_allclose(apply_f_inv_deriv(LOG, np.array([[0.0]])), [[1.0]], rtol=1e-15)


@pytest.mark.parametrize("n", FAMILY, ids=str)
def test_round_trip(n, rng):
    x = rng.uniform(0, 100, (20, 30))
    np.testing.assert_allclose(apply_f_inv(n, apply_f(n, x)), x, rtol=1e-10)


@pytest.mark.parametrize("n", FAMILY, ids=str)
def test_inverse_derivative_matches_central_differences(n, rng):
    y = rng.uniform(0.1, 10, (10, 10))
    h = 1e-6
    fd = (apply_f_inv(n, y + h) - apply_f_inv(n, y - h)) / (2 * h)
    np.testing.assert_allclose(apply_f_inv_deriv(n, y), fd, rtol=1e-5)


@pytest.mark.parametrize("n", FAMILY, ids=str)
@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=12))
def test_closure(n, values):
    x = np.array([values])
    for op in (apply_f, apply_f_inv, apply_f_inv_deriv):
        out = op(n, x)
        assert out.shape == x.shape
        assert np.all(np.isfinite(out)) and np.all(out >= 0)


def test_monotone(rng):
    x = np.sort(rng.uniform(0, 10, 50))[None, :]
    for n in FAMILY:
        if n.kind != "identity":
            assert np.all(np.diff(apply_f(n, x)) > 0)


def test_overflowing_derivative_is_clamped():
    with pytest.warns(DerivativeClampWarning):
        out = apply_f_inv_deriv(LOG, np.array([[1000.0, 1.0]]), eps=1e-12)
    assert out[0, 0] == 1e12
    assert out[0, 1] == pytest.approx(math.e)


def test_parse_and_str():
    assert Nonlinearity.parse("power:0.25") == Nonlinearity("power", 0.25)
    assert Nonlinearity.parse("log1p") == LOG
    assert Nonlinearity.parse(str(SQRT)) == SQRT
    assert str(IDENT) == "identity"
    with pytest.raises(ValueError):
        Nonlinearity.parse("relu")
    with pytest.raises(ValueError):
        Nonlinearity("power", 1.5)
    with pytest.raises(ValueError):
        Nonlinearity("power", 0.0)
    with pytest.raises(ValueError):
        Nonlinearity.parse("log1p:2")
