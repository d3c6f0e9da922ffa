"""Backend selection for the elementwise kernels.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded. Set ``HMNMF_PURE_PYTHON=1`` to force the fallback.
Matrix products are not routed through here; they always go to BLAS via
numpy.
"""
import os

import numpy as np

from . import _fallback

if os.environ.get("HMNMF_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _fallback
        BACKEND = "python"
    else:
        BACKEND = "cython"

IDENTITY, POWER, LOG1P = _fallback.IDENTITY, _fallback.POWER, _fallback.LOG1P


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def mu_update(p, num, den, eps):
    """``p * (num / (den + eps))``, the multiplicative-update step."""
    return _impl.mu_update(_c(p), _c(num), _c(den), float(eps))


def safe_divide(num, den, eps):
    return _impl.safe_divide(_c(num), _c(den), float(eps))


def hadamard(a, b):
    return _impl.hadamard(_c(a), _c(b))


def row_mean_broadcast(h):
    return _impl.row_mean_broadcast(_c(h))


def apply_forward(kind, param, x):
    return _impl.apply_forward(kind, float(param), _c(x))


def apply_inverse(kind, param, y):
    return _impl.apply_inverse(kind, float(param), _c(y))


def apply_inverse_deriv(kind, param, y, cap):
    return _impl.apply_inverse_deriv(kind, float(param), _c(y), float(cap))


def normalized_forward(kind, param, h, mean):
    return _impl.normalized_forward(kind, float(param), _c(h), _c(mean))


def half_sq_residual(x, y):
    return float(_impl.half_sq_residual(_c(x), _c(y)))


def gram_cost(xx, wtx, h, wtw, hht):
    """``0.5 * ||X - W H||^2`` expanded through Gram matrices.

    Avoids forming ``W H``; loses accuracy by cancellation only when the
    residual is tiny relative to ``||X||``. Floored at zero.
    """
    return float(_impl.gram_cost(float(xx), _c(wtx), _c(h), _c(wtw), _c(hht)))
