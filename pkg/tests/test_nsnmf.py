import warnings

import numpy as np
import pytest

from hmnmf.nsnmf import (
    DegenerateInputWarning,
    UnitConfig,
    cost,
    derive_seed,
    factorize,
    has_converged,
    initialize,
    smoothing_matrix,
    sparsity,
    update_h,
    update_w,
)
from hmnmf.matrix import ShapeError


def test_smoothing_matrix_examples():
    np.testing.assert_array_equal(smoothing_matrix(4, 0.0), np.eye(4))
    np.testing.assert_array_equal(smoothing_matrix(2, 1.0), [[0.5, 0.5], [0.5, 0.5]])
    np.testing.assert_array_equal(smoothing_matrix(2, 0.5), [[0.75, 0.25], [0.25, 0.75]])
    with pytest.raises(ValueError):
        smoothing_matrix(3, 1.1)
    with pytest.raises(ValueError):
        smoothing_matrix(3, -0.1)


@pytest.mark.parametrize("k", [1, 2, 3, 7, 10])
@pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 0.9, 1.0])
def test_smoothing_matrix_properties(k, theta):
    s = smoothing_matrix(k, theta)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(s, s.T)
    np.testing.assert_allclose(np.diag(s), (1 - theta) + theta / k, rtol=1e-15)


def test_cost_examples():
    w, h = np.random.default_rng(0).random((3, 2)), np.random.default_rng(1).random((2, 4))
    assert cost(w @ h, w, h) == pytest.approx(0.0, abs=1e-28)
    assert cost(np.array([[1.0]]), np.array([[1.0]]), np.array([[0.0]])) == 0.5
    assert cost(np.array([[2.0, 0.0], [0.0, 2.0]]), np.eye(2), np.eye(2)) == 1.0
    with pytest.raises(ShapeError):
        cost(np.ones((3, 3)), np.ones((3, 2)), np.ones((3, 3)))


def test_updates_fixed_point_at_exact_factorization(rng):
    w, h = rng.uniform(0.1, 1, (6, 3)), rng.uniform(0.1, 1, (3, 8))
    x = w @ h
    np.testing.assert_allclose(update_w(x, w, h), w, rtol=1e-9)
    np.testing.assert_allclose(update_h(x, w, h), h, rtol=1e-9)


def test_updates_preserve_zeros(rng):
    x = rng.random((5, 6))
    w, h = rng.random((5, 2)), rng.random((2, 6))
    w[3, 1] = 0.0
    h[0, 4] = 0.0
    assert update_w(x, w, h)[3, 1] == 0.0
    assert update_h(x, w, h)[0, 4] == 0.0


def test_alternating_updates_never_increase_cost(rng):
    # oracle: the explicit residual evaluated after every update pair
    x = rng.random((6, 2)) @ rng.random((2, 6))
    w, h = initialize(x, 2, np.random.default_rng(3))
    costs = [cost(x, w, h)]
    for _ in range(50):
        w = update_w(x, w, h)
        h = update_h(x, w, h)
        costs.append(cost(x, w, h))
        assert np.all(w >= 0) and np.all(h >= 0)
    assert np.all(np.diff(costs) <= 1e-10)


def test_theta_zero_matches_plain_updates(rng):
    x = rng.random((8, 9))
    cfg = UnitConfig(k=3, theta=0.0, max_iters=40, seed=5, tol=1e-300)
    w, h, trace = factorize(x, cfg)
    w_ref, h_ref = initialize(x, 3, np.random.default_rng(5))
    for _ in range(40):
        w_ref = update_w(x, w_ref, h_ref)
        h_ref = update_h(x, w_ref, h_ref)
    np.testing.assert_array_equal(w, w_ref)
    np.testing.assert_array_equal(h, h_ref)
    assert len(trace) == 40


def test_trace_matches_direct_cost(rng):
    x = rng.random((10, 12))
    for theta in (0.0, 0.6):
        w, h, trace = factorize(x, UnitConfig(k=3, theta=theta, max_iters=30, tol=1e-300))
        assert trace[-1] == pytest.approx(cost(x, w, h), rel=1e-10)


def test_smoothing_makes_w_sparser():
    higher = 0
    for seed in range(3):
        x = np.random.default_rng(seed).random((20, 50))
        w0, _, _ = factorize(x, UnitConfig(k=5, theta=0.0, seed=seed))
        w9, _, _ = factorize(x, UnitConfig(k=5, theta=0.9, seed=seed))
        higher += sparsity(w9) > sparsity(w0)
    assert higher == 3


def test_rank_one_single_entry_is_recovered():
    x = np.zeros((4, 5))
    x[2, 3] = 3.0
    w, h, trace = factorize(x, UnitConfig(k=1, max_iters=200))
    assert cost(x, w, h) < 1e-8
    assert len(trace) <= 200


def test_all_zero_input_is_flagged():
    x = np.zeros((3, 4))
    with pytest.warns(DegenerateInputWarning):
        w, h, trace = factorize(x, UnitConfig(k=2))
    assert trace == []
    assert not h.any()


def test_zero_rows_and_columns_are_allowed(rng):
    x = rng.random((6, 7))
    x[2] = 0.0
    x[:, 4] = 0.0
    w, h, _ = factorize(x, UnitConfig(k=2, max_iters=50))
    assert np.all(np.isfinite(w)) and np.all(np.isfinite(h))


def test_seed_determinism(rng):
    x = rng.random((9, 11))
    a = factorize(x, UnitConfig(k=3, seed=7, max_iters=20))
    b = factorize(x, UnitConfig(k=3, seed=7, max_iters=20))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    c = factorize(x, UnitConfig(k=3, seed=8, max_iters=20))
    assert not np.array_equal(a[0], c[0])


def test_initialization_scale(rng):
    x = rng.random((30, 40)) * 4
    ws, hs = initialize(x, 5, np.random.default_rng(0), "scaled_random")
    wu, hu = initialize(x, 5, np.random.default_rng(0), "uniform_random")
    assert np.all((wu > 0) & (wu <= 1)) and np.all((hu > 0) & (hu <= 1))
    scale = np.sqrt(x.mean() / 5)
    np.testing.assert_array_equal(ws, wu * scale)
    np.testing.assert_array_equal(hs, hu * scale)


def test_stopping_rule():
    assert not has_converged([5.0, 4.0], 1e-6, 5)
    assert has_converged([1.0] * 6, 1e-6, 5)
    assert not has_converged([2.0, 1.9, 1.8, 1.7, 1.6, 1.5], 1e-6, 5)
    assert has_converged([0.0] * 6, 1e-6, 5)


def test_config_validation():
    with pytest.raises(ValueError):
        UnitConfig(k=0)
    with pytest.raises(ValueError):
        UnitConfig(k=2, theta=2.0)
    with pytest.raises(ValueError):
        UnitConfig(k=2, init="svd")
    with pytest.raises(ValueError):
        UnitConfig(k=2, tol=0.0)


def test_derive_seed():
    assert derive_seed(42, 0) == 42
    assert derive_seed(42, 1) == derive_seed(42, 1)
    assert len({derive_seed(42, i) for i in range(10)}) == 10
