"""Single-layer non-smooth NMF.

Minimizes ``0.5 * ||X - W S H||_F^2`` with Lee-Seung multiplicative
updates, where ``S = (1 - theta) I + (theta / k) 11^T`` smooths the
coefficients. The W update sees the smoothed coefficients ``S H`` and the
H update sees ``W S``; smoothing H pushes the missing sparsity into W.
``theta = 0`` is plain NMF.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .matrix import (
    DEFAULT_EPS,
    ShapeError,
    as_nonneg,
    multiplicative_update,
)

INIT_METHODS = ("uniform_random", "scaled_random")


class DegenerateInputWarning(RuntimeWarning):
    """The data matrix is identically zero."""


@dataclass(frozen=True)
class UnitConfig:
    """Settings for one call of :func:`factorize`.

    ``tol`` is compared with the relative cost decrease over the last
    ``window`` iterations.
    """

    k: int
    theta: float = 0.0
    max_iters: int = 500
    tol: float = 1e-6
    eps: float = DEFAULT_EPS
    seed: int = 0
    init: str = "scaled_random"
    window: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not self.tol > 0 or not self.eps > 0:
            raise ValueError("tol and eps must be > 0")
        if self.init not in INIT_METHODS:
            raise ValueError(f"init must be one of {INIT_METHODS}, got {self.init!r}")
        if self.window < 1:
            raise ValueError("window must be >= 1")


def derive_seed(root, counter):
    """Seed for the ``counter``-th random consumer under ``root``.

    Counter 0 gets ``root`` itself so a one-layer stack seeds exactly like
    a bare :func:`factorize` call.
    """
    if counter == 0:
        return int(root)
    ss = np.random.SeedSequence(int(root), spawn_key=(int(counter),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def smoothing_matrix(k, theta):
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return (1.0 - theta) * np.eye(k) + (theta / k) * np.ones((k, k))


def _check_conformable(x, w, h):
    if w.shape[1] != h.shape[0] or x.shape != (w.shape[0], h.shape[1]):
        raise ShapeError(f"X {x.shape} is not conformable with W {w.shape} @ H {h.shape}")


def cost(x, w, h):
    _check_conformable(x, w, h)
    return kernels.half_sq_residual(x, w @ h)


def update_w(x, w, h, eps=DEFAULT_EPS):
    """``W * (X H^T) / (W H H^T)``, denominator evaluated as ``W (H H^T)``."""
    _check_conformable(x, w, h)
    return multiplicative_update(w, x @ h.T, w @ (h @ h.T), eps)


def update_h(x, w, h, eps=DEFAULT_EPS, wtx=None):
    """``H * (W^T X) / (W^T W H)``; pass ``wtx = W^T X`` if already known."""
    _check_conformable(x, w, h)
    if wtx is None:
        wtx = w.T @ x
    return multiplicative_update(h, wtx, (w.T @ w) @ h, eps)


def initialize(x, k, rng, method="scaled_random"):
    """Draw W (m x k) then H (k x n) uniformly from (0, 1].

    ``scaled_random`` multiplies both by ``sqrt(mean(X) / k)`` so the
    initial product sits at the magnitude of the data.
    """
    m, n = x.shape
    w = 1.0 - rng.random((m, k))
    h = 1.0 - rng.random((k, n))
    if method == "scaled_random":
        scale = np.sqrt(x.mean() / k)
        if scale > 0:
            w *= scale
            h *= scale
    return w, h


def has_converged(trace, tol, window):
    if len(trace) <= window:
        return False
    before, now = trace[-1 - window], trace[-1]
    if before <= 0.0:
        return True
    return abs(before - now) / before < tol


def factorize(x, cfg, w0=None, h0=None):
    """Factorize ``x ~ W H`` with ``cfg.k`` features.

    Parameters
    ----------
    x : array_like, shape (m, n)
        Non-negative data, one sample per column.
    cfg : UnitConfig
    w0, h0 : ndarray, optional
        Starting factors (``h0`` unsmoothed). Random initialization (seeded by ``cfg.seed``)
        is used for whichever is omitted.

    Returns
    -------
    w : ndarray, shape (m, k)
    h : ndarray, shape (k, n)
        The smoothed coefficients ``S H``, so that ``x ~ w @ h``.
    trace : list of float
        Cost after every iteration.
    """
    x = as_nonneg(x, "X")
    w, h = initialize(x, cfg.k, np.random.default_rng(cfg.seed), cfg.init)
    if w0 is not None:
        w = as_nonneg(w0, "W0").copy()
    if h0 is not None:
        h = as_nonneg(h0, "H0").copy()
    _check_conformable(x, w, h)

    if not x.any():
        warnings.warn("X is all zeros; returning zero coefficients", DegenerateInputWarning, stacklevel=2)
        return w, np.zeros_like(h), []

    smoother = smoothing_matrix(cfg.k, cfg.theta) if cfg.theta > 0 else None
    xx = float(np.vdot(x, x))
    trace = []
    for _ in range(cfg.max_iters):
        if smoother is None:
            w = update_w(x, w, h, cfg.eps)
            wtx = w.T @ x
            h = update_h(x, w, h, cfg.eps, wtx=wtx)
            trace.append(kernels.gram_cost(xx, wtx, h, w.T @ w, h @ h.T))
        else:
            w = update_w(x, w, smoother @ h, cfg.eps)
            ws = w @ smoother
            wtx = ws.T @ x
            h = update_h(x, ws, h, cfg.eps, wtx=wtx)
            trace.append(kernels.gram_cost(xx, wtx, h, ws.T @ ws, h @ h.T))
        if has_converged(trace, cfg.tol, cfg.window):
            break
    if smoother is not None:
        h = smoother @ h
    return w, h, trace


def sparsity(w, rel=1e-3):
    """Fraction of entries below ``rel`` times their column maximum."""
    colmax = w.max(axis=0, keepdims=True)
    return float(np.mean(w < rel * colmax))
