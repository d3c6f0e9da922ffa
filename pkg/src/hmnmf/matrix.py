"""Dense non-negative matrices and the kernels built on them.

A "non-negative matrix" here is simply a 2-D float64 ``numpy.ndarray``
whose entries are finite and >= 0. :func:`as_nonneg` validates and
converts; the remaining functions assume validated input and assert the
invariant on their output (stripped under ``python -O``).
"""
import numpy as np

from . import kernels

DEFAULT_EPS = 1e-12


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class NonNegativityError(ValueError):
    """A matrix contains a negative or non-finite entry."""


def _is_valid(a):
    return bool(np.all(np.isfinite(a)) and np.all(a >= 0))


def as_nonneg(a, name="matrix"):
    """Return ``a`` as a C-contiguous float64 array, validating invariants.

    Raises
    ------
    ShapeError
        If ``a`` is not 2-D or has an empty dimension.
    NonNegativityError
        If any entry is negative, NaN or infinite. The message names the
        first offending (row, col).
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name}: expected a non-empty 2-D matrix, got shape {a.shape}")
    bad = ~np.isfinite(a) | (a < 0)
    if bad.any():
        i, j = (int(v) for v in np.argwhere(bad)[0])
        raise NonNegativityError(
            f"{name}: entry ({i}, {j}) = {a[i, j]!r} is not a finite non-negative value"
        )
    return a


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    assert _is_valid(out)
    return out


def _same_shape(op, a, b):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def hadamard(a, b):
    _same_shape("hadamard", a, b)
    out = kernels.hadamard(a, b)
    assert _is_valid(out)
    return out


def safe_divide(num, den, eps=DEFAULT_EPS):
    """Entrywise ``num / (den + eps)``."""
    _same_shape("safe_divide", num, den)
    if not eps > 0:
        raise ValueError(f"safe_divide: eps must be > 0, got {eps}")
    out = kernels.safe_divide(num, den, eps)
    assert _is_valid(out)
    return out


def row_mean_broadcast(h):
    """Matrix of the same shape as ``h`` whose row k is constant, equal to
    the mean of row k of ``h``."""
    out = kernels.row_mean_broadcast(h)
    assert _is_valid(out)
    return out


def multiplicative_update(p, num, den, eps=DEFAULT_EPS, step=1.0):
    """``p * (num / (den + eps)) ** step`` entrywise; zeros of ``p`` stay zero.

    ``step < 1`` damps the update without moving its fixed points.
    """
    _same_shape("multiplicative_update", p, num)
    _same_shape("multiplicative_update", num, den)
    if step == 1.0:
        out = kernels.mu_update(p, num, den, eps)
    else:
        out = p * kernels.safe_divide(num, den, eps) ** step
    assert _is_valid(out)
    return out
