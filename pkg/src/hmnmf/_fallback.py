"""Pure numpy implementations of the fused kernels.

Same call signatures as the compiled ``_kernels`` module. Arguments are
expected to be C-contiguous float64 arrays; ``kernels`` takes care of that.
"""
import numpy as np

IDENTITY, POWER, LOG1P = 0, 1, 2


def mu_update(p, num, den, eps):
    return p * (num / (den + eps))


def safe_divide(num, den, eps):
    return num / (den + eps)


def hadamard(a, b):
    return a * b


def row_mean_broadcast(h):
    means = h.sum(axis=1) / h.shape[1]
    return np.repeat(means[:, None], h.shape[1], axis=1)


def _forward(kind, param, x):
    if kind == POWER:
        return np.power(x, param)
    if kind == LOG1P:
        return np.log1p(x)
    return x.copy()


def apply_forward(kind, param, x):
    return _forward(kind, param, x)


def apply_inverse(kind, param, y):
    if kind == POWER:
        return np.power(y, 1.0 / param)
    if kind == LOG1P:
        return np.expm1(y)
    return y.copy()


def apply_inverse_deriv(kind, param, y, cap):
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind == POWER:
            v = (1.0 / param) * np.power(y, 1.0 / param - 1.0)
        elif kind == LOG1P:
            v = np.exp(y)
        else:
            v = np.ones_like(y)
    bad = ~np.isfinite(v)
    clamped = int(bad.sum())
    if clamped:
        v[bad] = cap
    return v, clamped


def normalized_forward(kind, param, h, mean):
    pos = mean > 0.0
    r = np.divide(h, mean, out=np.zeros_like(h), where=pos)
    return _forward(kind, param, r)


def half_sq_residual(x, y):
    d = x - y
    return 0.5 * float(np.sum(d * d))


def gram_cost(xx, wtx, h, wtw, hht):
    c = 0.5 * (xx - 2.0 * float(np.vdot(wtx, h)) + float(np.vdot(wtw, hht)))
    return c if c > 0.0 else 0.0
