"""Stacked non-smooth NMF with joint fine-tuning.

Layer ``l`` factorizes the normalized output of the layer below,
``K(l-1) ~ W(l) H(l)`` with ``K(0) = X`` and ``K(l) = f(H(l) / M(l))``,
where ``M(l)`` broadcasts the per-feature (row) mean of ``H(l)``. After
layer-wise pretraining all layers are refined against ``X`` through the
top-down reconstruction

    Ht(L) = H(L),   Ht(l) = M(l) * f^-1(W(l+1) Ht(l+1)),   Xt = W(1) Ht(1)

minimizing ``0.5 * ||X - Xt||^2`` with multiplicative updates whose
numerator and denominator terms (``Nu``, ``De``) are propagated upward
from ``X`` and ``Xt``. Layers are indexed from 1 in the public API.
"""
import copy
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .matrix import (
    DEFAULT_EPS,
    ShapeError,
    as_nonneg,
    hadamard,
    matmul,
    multiplicative_update,
    row_mean_broadcast,
)
from .nonlinearity import Nonlinearity, apply_f_inv, apply_f_inv_deriv, normalize
from .nsnmf import UnitConfig, derive_seed, factorize, has_converged, update_h

DERIVATIVE_ARGS = ("h", "h_tilde")


class DivergenceError(FloatingPointError):
    """The top-down reconstruction overflowed during training or fold-in."""


class StepRejectedWarning(RuntimeWarning):
    """No damped update lowered the cost; iteration stopped early."""


@dataclass(frozen=True)
class LayerSpec:
    k: int
    theta: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"layer feature count must be >= 1, got {self.k}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class JointConfig:
    """Settings for joint training and fold-in inference.

    ``derivative_at`` picks where the inverse-nonlinearity derivative is
    evaluated when propagating ``Nu``/``De`` to layer ``l > 1``:
    ``"h"`` (default) uses ``W(l) H(l)``, ``"h_tilde"`` uses ``W(l) Ht(l)`` (the
    true chain rule). They coincide at the top layer, hence for L = 2.

    Hidden-layer coefficients ``H(l)``, ``l < L``, do not enter the joint
    cost, and their multiplicative update has no fixed point there: it
    grows without bound. They stay frozen at their pretrained values unless
    ``update_hidden_h`` is set.

    With ``safeguard`` the iterative drivers (:func:`joint_train` and the
    joint fold-in of :func:`transform`) reject a sweep that raises the cost
    by more than ``tol`` (relative) or overflows, and retry it with every
    multiplier raised to a halved power. The power grows back towards 1
    after each accepted sweep; below ``min_step`` training stops with a
    :class:`StepRejectedWarning`. A sweep at power 1 is exactly
    :func:`joint_step`.
    """

    max_iters: int = 300
    tol: float = 1e-6
    eps: float = DEFAULT_EPS
    seed: int = 0
    window: int = 5
    derivative_at: str = "h"
    update_hidden_h: bool = False
    safeguard: bool = True
    min_step: float = 2.0**-10

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not self.tol > 0 or not self.eps > 0:
            raise ValueError("tol and eps must be > 0")
        if self.derivative_at not in DERIVATIVE_ARGS:
            raise ValueError(f"derivative_at must be one of {DERIVATIVE_ARGS}")
        if not 0.0 < self.min_step <= 1.0:
            raise ValueError("min_step must lie in (0, 1]")


@dataclass
class Layer:
    w: np.ndarray
    h: np.ndarray
    m: np.ndarray
    theta: float = 0.0

    @property
    def k(self):
        return self.w.shape[1]


@dataclass
class HierarchicalModel:
    layers: list
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    seed: int = 0

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def input_dim(self):
        return self.layers[0].w.shape[0]

    @property
    def n_samples(self):
        return self.layers[0].h.shape[1]

    @property
    def feature_counts(self):
        return [layer.k for layer in self.layers]

    def copy(self):
        return copy.deepcopy(self)

    def validate(self):
        """Check non-negativity and the shape chain; raise on violation."""
        if not self.layers:
            raise ShapeError("model has no layers")
        n = self.n_samples
        rows = self.input_dim
        for i, layer in enumerate(self.layers, start=1):
            layer.w = as_nonneg(layer.w, f"W_{i}")
            layer.h = as_nonneg(layer.h, f"H_{i}")
            layer.m = as_nonneg(layer.m, f"M_{i}")
            if layer.w.shape[0] != rows:
                raise ShapeError(f"W_{i} has {layer.w.shape[0]} rows, expected {rows}")
            k = layer.w.shape[1]
            if layer.h.shape != (k, n):
                raise ShapeError(f"H_{i} has shape {layer.h.shape}, expected {(k, n)}")
            if layer.m.shape != (k, n):
                raise ShapeError(f"M_{i} has shape {layer.m.shape}, expected {(k, n)}")
            if np.any(layer.m != layer.m[:, :1]):
                raise ShapeError(f"M_{i} is not constant along rows")
            rows = k
        return self


def compute_k(h, m, f):
    """Normalized layer output ``f(H / M)``; all-zero rows stay zero."""
    if h.shape != m.shape:
        raise ShapeError(f"compute_k: H {h.shape} and M {m.shape} differ")
    return normalize(f, h, m)


def pretrain(x, specs, ucfg=None, f=None, return_traces=False):
    """Train each layer separately on the output of the one below.

    Layer ``i`` (0-based) is seeded with ``derive_seed(ucfg.seed, i)``; all
    other unit settings are shared, with ``k`` and ``theta`` taken from the
    corresponding :class:`LayerSpec`.
    """
    if not specs:
        raise ValueError("at least one layer spec is required")
    x = as_nonneg(x, "X")
    f = Nonlinearity() if f is None else f
    ucfg = UnitConfig(k=specs[0].k) if ucfg is None else ucfg
    layers, traces = [], []
    data = x
    for i, spec in enumerate(specs):
        cfg = replace(ucfg, k=spec.k, theta=spec.theta, seed=derive_seed(ucfg.seed, i))
        w, h, trace = factorize(data, cfg)
        m = row_mean_broadcast(h)
        layers.append(Layer(w=w, h=h, m=m, theta=spec.theta))
        traces.append(trace)
        data = compute_k(h, m, f)
    model = HierarchicalModel(layers=layers, nonlinearity=f, seed=ucfg.seed)
    return (model, traces) if return_traces else model


def _tildes(ws, hs, ms, f, top=None):
    """Top-down reconstructions ``[Ht(1), ..., Ht(L)]``.

    ``ms[l]`` may be a single column; it is broadcast across samples.
    """
    n_layers = len(ws)
    out = [None] * n_layers
    out[-1] = hs[-1] if top is None else top
    for l in range(n_layers - 2, -1, -1):
        with np.errstate(over="ignore"):
            up = apply_f_inv(f, matmul(ws[l + 1], out[l + 1]))
        if not np.all(np.isfinite(up)):
            raise DivergenceError(f"inverse nonlinearity {f} overflowed at layer {l + 1}")
        mean = ms[l]
        if mean.shape != up.shape:
            mean = np.broadcast_to(mean[:, :1], up.shape)
        out[l] = hadamard(mean, up)
    return out


def reconstruct_h_tilde(model, l):
    """Reconstruction of ``H(l)`` propagated down from the top layer."""
    if not 1 <= l <= model.n_layers:
        raise IndexError(f"layer index {l} outside 1..{model.n_layers}")
    ws, hs, ms = _params(model)
    return _tildes(ws, hs, ms, model.nonlinearity)[l - 1]


def reconstruct_x(model):
    ws, hs, ms = _params(model)
    return matmul(ws[0], _tildes(ws, hs, ms, model.nonlinearity)[0])


def reconstruct_from_top(model, h_top):
    """Input-space reconstruction of an arbitrary top-layer representation
    (e.g. the output of :func:`transform`), using the frozen means."""
    ws, hs, ms = _params(model)
    h_top = as_nonneg(h_top, "H_top")
    if h_top.shape[0] != ws[-1].shape[1]:
        raise ShapeError(f"top representation has {h_top.shape[0]} rows, expected {ws[-1].shape[1]}")
    return matmul(ws[0], _tildes(ws, hs, ms, model.nonlinearity, top=h_top)[0])


def joint_cost(model, x):
    return kernels.half_sq_residual(x, reconstruct_x(model))


def _params(model):
    return ([l.w for l in model.layers], [l.h for l in model.layers], [l.m for l in model.layers])


def _upward(ws, hs, ms, tildes, wtx, f, cfg, upto):
    """``(Nu(upto), De(upto))`` for a layer above the first (0-based ``upto``).

    Starts from ``W1^T X`` and ``W1^T Xt = (W1^T W1) Ht(1)`` so neither
    ``Xt`` nor any other input-sized product is formed.
    """
    nu, de = wtx, (ws[0].T @ ws[0]) @ tildes[0]
    for j in range(1, upto + 1):
        if j > 1:
            nu, de = ws[j - 1].T @ nu, ws[j - 1].T @ de
        arg = hs[j] if cfg.derivative_at == "h" else tildes[j]
        gate = hadamard(ms[j - 1], apply_f_inv_deriv(f, matmul(ws[j], arg), cfg.eps))
        nu, de = hadamard(nu, gate), hadamard(de, gate)
    return nu, de


def _w_terms(ws, hs, ms, x, wtx, f, cfg, l):
    tildes = _tildes(ws, hs, ms, f)
    ht = tildes[l]
    if l == 0:
        return x @ ht.T, ws[0] @ (ht @ ht.T)
    nu, de = _upward(ws, hs, ms, tildes, wtx, f, cfg, l)
    return nu @ ht.T, de @ ht.T


def _h_terms(ws, hs, ms, wtx, f, cfg, l):
    tildes = _tildes(ws, hs, ms, f)
    if l == 0:
        return wtx, (ws[0].T @ ws[0]) @ tildes[0]
    nu, de = _upward(ws, hs, ms, tildes, wtx, f, cfg, l)
    return ws[l].T @ nu, ws[l].T @ de


def _gram_joint_cost(ws, hs, ms, xx, wtx, f):
    ht = _tildes(ws, hs, ms, f)[0]
    return kernels.gram_cost(xx, wtx, ht, ws[0].T @ ws[0], ht @ ht.T)


def joint_multipliers(model, x, l, cfg=None):
    """Multiplicative factors the next joint update would apply to
    ``W(l)`` and ``H(l)`` given the current parameters (1-based ``l``)."""
    cfg = JointConfig() if cfg is None else cfg
    ws, hs, ms = _params(model)
    wtx = ws[0].T @ x
    f = model.nonlinearity
    w_num, w_den = _w_terms(ws, hs, ms, x, wtx, f, cfg, l - 1)
    h_num, h_den = _h_terms(ws, hs, ms, wtx, f, cfg, l - 1)
    return kernels.safe_divide(w_num, w_den, cfg.eps), kernels.safe_divide(h_num, h_den, cfg.eps)


def _sweep(ws, hs, ms, x, f, cfg, step=1.0):
    n_layers = len(ws)
    ws, hs = list(ws), list(hs)
    wtx = None
    for l in range(n_layers):
        num, den = _w_terms(ws, hs, ms, x, wtx, f, cfg, l)
        ws[l] = multiplicative_update(ws[l], num, den, cfg.eps, step)
        if l == 0:
            wtx = ws[0].T @ x
        if l < n_layers - 1 and not cfg.update_hidden_h:
            continue
        num, den = _h_terms(ws, hs, ms, wtx, f, cfg, l)
        hs[l] = multiplicative_update(hs[l], num, den, cfg.eps, step)
    return ws, hs, wtx


def _descend(state, advance, cost, cfg):
    """Iterate ``state = advance(state, step)`` until the relative cost
    change stalls, damping rejected sweeps as described in
    :class:`JointConfig`. Returns ``(state, trace)``."""
    prev = cost(state) if cfg.safeguard else None
    trace, step = [], 1.0
    for it in range(cfg.max_iters):
        while True:
            if not cfg.safeguard:
                try:
                    cand = advance(state, step)
                except DivergenceError as err:
                    raise DivergenceError(f"diverged at iteration {it + 1}: {err}") from err
                value = cost(cand)
                break
            try:
                cand = advance(state, step)
                value = cost(cand)
            except DivergenceError:
                value = math.inf
            if value <= prev * (1.0 + cfg.tol):
                break
            step /= 2.0
            if step < cfg.min_step:
                warnings.warn(
                    f"no damped update lowered the cost at iteration {it + 1}; stopping",
                    StepRejectedWarning,
                    stacklevel=3,
                )
                return state, trace
        state, prev = cand, value
        trace.append(value)
        step = min(1.0, 2.0 * step)
        if has_converged(trace, cfg.tol, cfg.window):
            break
    return state, trace


def joint_step(model, x, cfg=None):
    """One sweep over the layers, bottom to top, W before H in each.

    The ``Nu``/``De`` terms are rebuilt from the current parameters before
    every update, so a layer's H update sees its freshly updated W. Only
    the top layer's H is updated unless ``cfg.update_hidden_h``. Returns a
    new model; ``model`` is left untouched.
    """
    cfg = JointConfig() if cfg is None else cfg
    ws, hs, ms = _params(model)
    ws, hs, _ = _sweep(ws, hs, ms, x, model.nonlinearity, cfg)
    layers = [replace(layer, w=w, h=h) for layer, w, h in zip(model.layers, ws, hs)]
    return replace(model, layers=layers)


def joint_train(model, x, cfg=None):
    """Iterate :func:`joint_step` until the relative joint-cost decrease
    over ``cfg.window`` steps drops below ``cfg.tol`` or ``cfg.max_iters``
    is reached. Returns ``(model, trace)``.

    For a nonlinear ``f`` the literal updates can overshoot, oscillate
    and overflow; ``cfg.safeguard`` (on by default) damps such sweeps.
    Without it an overflow raises :class:`DivergenceError`.
    """
    cfg = JointConfig() if cfg is None else cfg
    x = as_nonneg(x, "X")
    if x.shape != (model.input_dim, model.n_samples):
        raise ShapeError(f"X {x.shape} does not match model ({model.input_dim}, {model.n_samples})")
    f = model.nonlinearity
    ws, hs, ms = _params(model)
    xx = float(np.vdot(x, x))

    def advance(state, step):
        return _sweep(state[0], state[1], ms, x, f, cfg, step)

    def cost(state):
        return _gram_joint_cost(state[0], state[1], ms, xx, state[2], f)

    (ws, hs, _), trace = _descend((ws, hs, ws[0].T @ x), advance, cost, cfg)
    layers = [replace(layer, w=w, h=h) for layer, w, h in zip(model.layers, ws, hs)]
    return replace(model, layers=layers), trace


def composite_features(model):
    """``W(1) W(2) ... W(L)``: top-level features expressed in input space."""
    out = model.layers[0].w
    for layer in model.layers[1:]:
        out = matmul(out, layer.w)
    return out


def transform(model, x_new, cfg=None, method="joint"):
    """Top-layer representation of new samples by fold-in.

    Every ``W(l)`` and ``M(l)`` stays frozen. ``"layerwise"`` finds each
    layer's coefficients with multiplicative H updates against the
    normalized output of the layer below. ``"joint"`` (the default) then
    refines the top layer against the input through the full top-down
    reconstruction, with the same H update joint training uses; this
    matches what a jointly trained model was optimized for. Initialization is per
    column, so samples only interact through the shared stopping rule.
    """
    if method not in ("layerwise", "joint"):
        raise ValueError(f"unknown fold-in method {method!r}")
    cfg = JointConfig() if cfg is None else cfg
    x_new = as_nonneg(x_new, "X_new")
    if x_new.shape[0] != model.input_dim:
        raise ShapeError(f"new data has {x_new.shape[0]} rows, model expects {model.input_dim}")
    f = model.nonlinearity
    data = x_new
    hs, ms = [], []
    for i, layer in enumerate(model.layers):
        k = layer.k
        h = np.repeat(np.sqrt(data.mean(axis=0) / k)[None, :], k, axis=0)
        wtx = layer.w.T @ data
        xx = float(np.vdot(data, data))
        wtw = layer.w.T @ layer.w
        trace = []
        for _ in range(cfg.max_iters):
            h = update_h(data, layer.w, h, cfg.eps, wtx=wtx)
            trace.append(kernels.gram_cost(xx, wtx, h, wtw, h @ h.T))
            if has_converged(trace, cfg.tol, cfg.window):
                break
        mean = np.ascontiguousarray(np.broadcast_to(layer.m[:, :1], h.shape))
        hs.append(h)
        ms.append(mean)
        if i < model.n_layers - 1:
            data = compute_k(h, mean, f)
    if method == "joint" and model.n_layers > 1:
        ws = [layer.w for layer in model.layers]
        top = model.n_layers - 1
        wtx = ws[0].T @ x_new
        xx = float(np.vdot(x_new, x_new))

        def advance(h_top, step):
            num, den = _h_terms(ws, hs[:top] + [h_top], ms, wtx, f, cfg, top)
            return multiplicative_update(h_top, num, den, cfg.eps, step)

        def cost(h_top):
            return _gram_joint_cost(ws, hs[:top] + [h_top], ms, xx, wtx, f)

        hs[top], _ = _descend(hs[top], advance, cost, cfg)
    return hs[-1]
