"""Invertible nonlinearities used between layers.

Each member maps [0, inf) onto [0, inf), is strictly increasing, and has
a non-negative inverse and inverse derivative, so multiplicative updates
built from them keep every factor non-negative.

    identity   f(x) = x
    power:g    f(x) = x**g,       0 < g <= 1
    log1p      f(x) = log(1 + x)
"""
import warnings
from dataclasses import dataclass

from . import kernels
from .matrix import DEFAULT_EPS

_KINDS = {"identity": kernels.IDENTITY, "power": kernels.POWER, "log1p": kernels.LOG1P}


class DerivativeClampWarning(RuntimeWarning):
    """Non-finite inverse derivative values were replaced by 1/eps."""


@dataclass(frozen=True)
class Nonlinearity:
    kind: str = "power"
    param: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown nonlinearity {self.kind!r}; choose from {sorted(_KINDS)}")
        if self.kind == "power":
            if not 0.0 < self.param <= 1.0:
                raise ValueError(f"power exponent must lie in (0, 1], got {self.param}")
        else:
            # the parameter is meaningless for the other kinds; normalize it
            object.__setattr__(self, "param", 0.0)

    @classmethod
    def parse(cls, text):
        """Parse ``"identity"``, ``"log1p"`` or ``"power:<gamma>"``."""
        name, _, arg = text.strip().partition(":")
        if name == "power":
            return cls("power", float(arg) if arg else 0.5)
        if arg:
            raise ValueError(f"nonlinearity {name!r} takes no parameter")
        return cls(name)

    def __str__(self):
        return f"power:{self.param!r}" if self.kind == "power" else self.kind

    @property
    def code(self):
        return _KINDS[self.kind]


IDENTITY = Nonlinearity("identity")


def apply_f(n, x):
    return kernels.apply_forward(n.code, n.param, x)


def apply_f_inv(n, y):
    return kernels.apply_inverse(n.code, n.param, y)


def apply_f_inv_deriv(n, y, eps=DEFAULT_EPS):
    """Derivative of the inverse of ``n`` evaluated entrywise at ``y``.

    Overflowing values (``exp`` of large inputs for log1p) are clamped to
    ``1/eps`` and a :class:`DerivativeClampWarning` is issued.
    """
    out, clamped = kernels.apply_inverse_deriv(n.code, n.param, y, 1.0 / eps)
    if clamped:
        warnings.warn(
            f"{clamped} inverse-derivative value(s) of {n} clamped to {1.0 / eps:g}",
            DerivativeClampWarning,
            stacklevel=2,
        )
    return out


def normalize(n, h, mean):
    """``f(h / mean)`` entrywise, with zero wherever ``mean`` is zero."""
    return kernels.normalized_forward(n.code, n.param, h, mean)
