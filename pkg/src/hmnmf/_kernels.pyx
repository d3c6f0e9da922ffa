# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused elementwise kernels (compiled backend).

Every function mirrors the one of the same name in ``_fallback`` and
performs the same floating-point operations in the same order, so the
two backends agree bit for bit except where libm and numpy differ
(``pow``, ``exp``, ``expm1``, ``log1p``) and in reductions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, exp, expm1, log1p, isfinite

cnp.import_array()

DEF IDENTITY = 0
DEF POWER = 1
DEF LOG1P = 2


def mu_update(const double[:, ::1] p, const double[:, ::1] num,
              const double[:, ::1] den, double eps):
    cdef Py_ssize_t i, j, m = p.shape[0], n = p.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                o[i, j] = p[i, j] * (num[i, j] / (den[i, j] + eps))
    return out


def safe_divide(const double[:, ::1] num, const double[:, ::1] den, double eps):
    cdef Py_ssize_t i, j, m = num.shape[0], n = num.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                o[i, j] = num[i, j] / (den[i, j] + eps)
    return out


def hadamard(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t i, j, m = a.shape[0], n = a.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                o[i, j] = a[i, j] * b[i, j]
    return out


def row_mean_broadcast(const double[:, ::1] h):
    cdef Py_ssize_t i, j, m = h.shape[0], n = h.shape[1]
    cdef double s
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(n):
                s = s + h[i, j]
            s = s / n
            for j in range(n):
                o[i, j] = s
    return out


# numpy evaluates x ** 0.5, x ** 1 and x ** 2 as sqrt, copy and square;
# matching that keeps the backends identical and avoids slow pow calls.
cdef inline double _pow(double x, double p) nogil:
    if p == 0.5:
        return sqrt(x)
    if p == 2.0:
        return x * x
    if p == 1.0:
        return x
    return pow(x, p)


cdef inline double _forward(int kind, double param, double x) nogil:
    if kind == POWER:
        return _pow(x, param)
    if kind == LOG1P:
        return log1p(x)
    return x


DEF OP_COPY = 0
DEF OP_SQRT = 1
DEF OP_SQUARE = 2
DEF OP_POW = 3
DEF OP_LOG1P = 4
DEF OP_EXPM1 = 5


cdef int _pow_op(double p):
    if p == 0.5:
        return OP_SQRT
    if p == 2.0:
        return OP_SQUARE
    if p == 1.0:
        return OP_COPY
    return OP_POW


cdef void _map(int op, double p, const double[:, ::1] x, double[:, ::1] o) noexcept nogil:
    # one branch-free loop per operation so the compiler can vectorize
    cdef Py_ssize_t i, j, m = x.shape[0], n = x.shape[1]
    if op == OP_SQRT:
        for i in range(m):
            for j in range(n):
                o[i, j] = sqrt(x[i, j])
    elif op == OP_SQUARE:
        for i in range(m):
            for j in range(n):
                o[i, j] = x[i, j] * x[i, j]
    elif op == OP_POW:
        for i in range(m):
            for j in range(n):
                o[i, j] = pow(x[i, j], p)
    elif op == OP_LOG1P:
        for i in range(m):
            for j in range(n):
                o[i, j] = log1p(x[i, j])
    elif op == OP_EXPM1:
        for i in range(m):
            for j in range(n):
                o[i, j] = expm1(x[i, j])
    else:
        for i in range(m):
            for j in range(n):
                o[i, j] = x[i, j]


def apply_forward(int kind, double param, const double[:, ::1] x):
    cdef int op = _pow_op(param) if kind == POWER else (OP_LOG1P if kind == LOG1P else OP_COPY)
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        _map(op, param, x, o)
    return out


def apply_inverse(int kind, double param, const double[:, ::1] y):
    cdef double inv_param = 1.0 / param if kind == POWER else 0.0
    cdef int op = _pow_op(inv_param) if kind == POWER else (OP_EXPM1 if kind == LOG1P else OP_COPY)
    out = np.empty((y.shape[0], y.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        _map(op, inv_param, y, o)
    return out


def apply_inverse_deriv(int kind, double param, const double[:, ::1] y, double cap):
    """Derivative of the inverse; non-finite values are replaced by ``cap``.

    Returns ``(values, n_clamped)``.
    """
    cdef Py_ssize_t i, j, m = y.shape[0], n = y.shape[1]
    cdef Py_ssize_t clamped = 0
    cdef double v, scale = 0.0, expo = 0.0
    if kind == POWER:
        scale = 1.0 / param
        expo = 1.0 / param - 1.0
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                if kind == POWER:
                    v = scale * _pow(y[i, j], expo)
                elif kind == LOG1P:
                    v = exp(y[i, j])
                else:
                    v = 1.0
                if not isfinite(v):
                    v = cap
                    clamped += 1
                o[i, j] = v
    return out, clamped


def normalized_forward(int kind, double param, const double[:, ::1] h,
                       const double[:, ::1] mean):
    """``f(h / mean)`` with zero wherever ``mean`` is zero."""
    cdef Py_ssize_t i, j, m = h.shape[0], n = h.shape[1]
    cdef double r
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                if mean[i, j] > 0.0:
                    r = h[i, j] / mean[i, j]
                else:
                    r = 0.0
                o[i, j] = _forward(kind, param, r)
    return out


def half_sq_residual(const double[:, ::1] x, const double[:, ::1] y):
    cdef Py_ssize_t i, j, m = x.shape[0], n = x.shape[1]
    cdef double d, row, total = 0.0
    with nogil:
        for i in range(m):
            row = 0.0
            for j in range(n):
                d = x[i, j] - y[i, j]
                row = row + d * d
            total = total + row
    return 0.5 * total


def gram_cost(double xx, const double[:, ::1] wtx, const double[:, ::1] h,
              const double[:, ::1] wtw, const double[:, ::1] hht):
    """``0.5 * ||X - W H||^2`` from ``||X||^2``, ``W^T X``, ``H``, ``W^T W``
    and ``H H^T``, floored at zero."""
    cdef Py_ssize_t i, j
    cdef double cross = 0.0, quad = 0.0, row, c
    with nogil:
        for i in range(h.shape[0]):
            row = 0.0
            for j in range(h.shape[1]):
                row = row + wtx[i, j] * h[i, j]
            cross = cross + row
        for i in range(wtw.shape[0]):
            row = 0.0
            for j in range(wtw.shape[1]):
                row = row + wtw[i, j] * hht[i, j]
            quad = quad + row
    c = 0.5 * (xx - 2.0 * cross + quad)
    return c if c > 0.0 else 0.0
