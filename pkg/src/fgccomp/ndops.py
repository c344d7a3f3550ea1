"""Dense differentiable primitives with hand-derived backward rules.

Values are 2-D float64 numpy arrays. A Tape records every primitive as it
executes; ``Tape.backward`` replays the records in exact reverse order and
accumulates analytic gradients into each participating Var. Passing
``tape=None`` runs the forward math without recording, for evaluation.

Gradient accumulation never mutates an existing gradient array in place,
so ops that hand the same array to several inputs stay aliasing-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends

LAYER_NORM_EPS = 1e-5
BCE_PROB_EPS = 1e-7


class ShapeError(ValueError):
    pass


class Var:
    """A matrix value participating in a taped computation."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None


class Parameter(Var):
    """Trainable value with a persistent gradient and Adam moment state."""

    __slots__ = ("name", "adam_m", "adam_v", "step_count")

    def __init__(self, value, name: str = ""):
        super().__init__(value)
        self.name = name
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)
        self.step_count = 0

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)


class Tape:
    """Ordered record of executed ops; backward walks it in reverse."""

    def __init__(self):
        self._steps = []

    def record(self, out: Var, backward_fn):
        self._steps.append((out, backward_fn))

    def backward(self, loss: Var):
        if loss.value.size != 1:
            raise ShapeError("backward must start from a scalar loss")
        loss.grad = np.ones_like(loss.value)
        for out, fn in reversed(self._steps):
            if out.grad is not None:
                fn(out.grad)


def _accum(var: Var, g: np.ndarray):
    var.grad = g if var.grad is None else var.grad + g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def matmul(tape, a: Var, b: Var) -> Var:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul {a.value.shape} x {b.value.shape}")
    out = Var(a.value @ b.value)
    if tape is not None:
        def bwd(g):
            _accum(a, g @ b.value.T)
            _accum(b, a.value.T @ g)
        tape.record(out, bwd)
    return out


def linear(tape, x: Var, w: Var) -> Var:
    """x @ w.T for weights stored as (out_dim, in_dim)."""
    if x.value.shape[1] != w.value.shape[1]:
        raise ShapeError(f"linear {x.value.shape} x {w.value.shape}")
    out = Var(x.value @ w.value.T)
    if tape is not None:
        def bwd(g):
            _accum(x, g @ w.value)
            _accum(w, g.T @ x.value)
        tape.record(out, bwd)
    return out


def add(tape, a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add {a.value.shape} vs {b.value.shape}")
    out = Var(a.value + b.value)
    if tape is not None:
        def bwd(g):
            _accum(a, g)
            _accum(b, g)
        tape.record(out, bwd)
    return out


def add_bias(tape, x: Var, b: Var) -> Var:
    """Add a (1, k) bias row to every row of x."""
    if b.value.shape != (1, x.value.shape[1]):
        raise ShapeError(f"bias {b.value.shape} for input {x.value.shape}")
    out = Var(x.value + b.value)
    if tape is not None:
        def bwd(g):
            _accum(x, g)
            _accum(b, g.sum(axis=0, keepdims=True))
        tape.record(out, bwd)
    return out


def scale(tape, x: Var, c: float) -> Var:
    out = Var(x.value * c)
    if tape is not None:
        def bwd(g):
            _accum(x, g * c)
        tape.record(out, bwd)
    return out


def mul(tape, a: Var, b: Var) -> Var:
    """Elementwise product of same-shape matrices."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"mul {a.value.shape} vs {b.value.shape}")
    out = Var(a.value * b.value)
    if tape is not None:
        def bwd(g):
            _accum(a, g * b.value)
            _accum(b, g * a.value)
        tape.record(out, bwd)
    return out


def sigmoid(tape, x: Var) -> Var:
    out = Var(_sigmoid(x.value))
    if tape is not None:
        def bwd(g):
            _accum(x, g * out.value * (1.0 - out.value))
        tape.record(out, bwd)
    return out


def relu(tape, x: Var) -> Var:
    out = Var(np.maximum(x.value, 0.0))
    if tape is not None:
        def bwd(g):
            _accum(x, g * (x.value > 0.0))
        tape.record(out, bwd)
    return out


def concat_cols(tape, *xs: Var) -> Var:
    rows = xs[0].value.shape[0]
    if any(x.value.shape[0] != rows for x in xs):
        raise ShapeError("concat_cols inputs disagree on row count")
    out = Var(np.concatenate([x.value for x in xs], axis=1))
    if tape is not None:
        widths = [x.value.shape[1] for x in xs]
        def bwd(g):
            start = 0
            for x, w in zip(xs, widths):
                _accum(x, g[:, start:start + w])
                start += w
        tape.record(out, bwd)
    return out


def convex_mix(tape, a: Var, b: Var, alpha: Var) -> Var:
    """Row-wise alpha * a + (1 - alpha) * b with alpha of shape (n, 1)."""
    if a.value.shape != b.value.shape:
        raise ShapeError("convex_mix branch shapes differ")
    if alpha.value.shape != (a.value.shape[0], 1):
        raise ShapeError("alpha must be a column vector matching the rows")
    out = Var(alpha.value * a.value + (1.0 - alpha.value) * b.value)
    if tape is not None:
        def bwd(g):
            _accum(a, g * alpha.value)
            _accum(b, g * (1.0 - alpha.value))
            _accum(alpha, ((a.value - b.value) * g).sum(axis=1, keepdims=True))
        tape.record(out, bwd)
    return out


def group_mean(tape, x: Var, idx: np.ndarray, offsets: np.ndarray) -> Var:
    """Segment means of rows of x; empty segments give zero rows."""
    out = Var(backends.segment_mean(x.value, idx, offsets))
    if tape is not None:
        n_rows = x.value.shape[0]
        def bwd(g):
            _accum(x, backends.segment_mean_backward(g, idx, offsets, n_rows))
        tape.record(out, bwd)
    return out


def take_rows(tape, x: Var, rows: np.ndarray) -> Var:
    out = Var(x.value[rows])
    if tape is not None:
        def bwd(g):
            gin = np.zeros_like(x.value)
            np.add.at(gin, rows, g)
            _accum(x, gin)
        tape.record(out, bwd)
    return out


def layer_norm(tape, x: Var, gain: Var, shift: Var, eps: float = LAYER_NORM_EPS) -> Var:
    """Per-row standardization followed by a learnable affine map."""
    k = x.value.shape[1]
    if k < 2:
        raise ShapeError("layer_norm needs at least 2 columns")
    if gain.value.shape != (1, k) or shift.value.shape != (1, k):
        raise ShapeError("layer_norm affine params must be (1, cols)")
    mu = x.value.mean(axis=1, keepdims=True)
    var = x.value.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv_std
    out = Var(gain.value * xhat + shift.value)
    if tape is not None:
        def bwd(g):
            _accum(shift, g.sum(axis=0, keepdims=True))
            _accum(gain, (g * xhat).sum(axis=0, keepdims=True))
            gxhat = g * gain.value
            dx = (gxhat
                  - gxhat.mean(axis=1, keepdims=True)
                  - xhat * (gxhat * xhat).mean(axis=1, keepdims=True)) * inv_std
            _accum(x, dx)
        tape.record(out, bwd)
    return out


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy of probabilities, clamped for stability.

    Value-only helper; the differentiable training path is
    ``bce_with_logits``, which fuses the sigmoid for exact gradients.
    """
    p = np.clip(np.asarray(p, dtype=np.float64), BCE_PROB_EPS, 1.0 - BCE_PROB_EPS)
    y = np.asarray(y, dtype=np.float64)
    if p.size == 0:
        raise ValueError("empty supervision set")
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_with_logits(tape, logits: Var, targets: np.ndarray) -> Var:
    """Mean sigmoid cross-entropy over a column of logits.

    Uses softplus(z) - y*z, which stays finite for any representable
    logit, and the fused gradient (sigmoid(z) - y) / m.
    """
    if logits.value.ndim != 2 or logits.value.shape[1] != 1:
        raise ShapeError("logits must be a column vector")
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    m = y.shape[0]
    if m == 0:
        raise ValueError("empty supervision set")
    if logits.value.shape[0] != m:
        raise ShapeError("logit / target length mismatch")
    z = logits.value[:, 0]
    softplus = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
    out = Var(np.array([[np.mean(softplus - y * z)]]))
    if tape is not None:
        def bwd(g):
            _accum(logits, ((_sigmoid(z) - y) * (g[0, 0] / m))[:, None])
        tape.record(out, bwd)
    return out


def glorot(rng: np.random.Generator, shape, dtype=np.float64) -> np.ndarray:
    """Uniform Glorot draw with bound sqrt(6 / (fan_in + fan_out))."""
    fan_out, fan_in = shape
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def zero_grads(params):
    for p in params:
        p.zero_grad()


def adam_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update; gradients are zeroed afterwards."""
    for p in params:
        p.step_count += 1
        g = p.grad
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * (g * g)
        m_hat = p.adam_m / (1.0 - beta1 ** p.step_count)
        v_hat = p.adam_v / (1.0 - beta2 ** p.step_count)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()


@dataclass
class FiniteDiffReport:
    max_rel_err: float
    rel_tol: float
    per_param: dict = field(default_factory=dict)
    worst_param: str = ""

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.rel_tol


def finite_diff_check(loss_fn, params, rel_tol=1e-4, step=1e-5,
                      samples_per_param=50, seed=0) -> FiniteDiffReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn(tape)`` must rebuild the loss Var from the current parameter
    values; it is called with a fresh Tape once for the analytic pass and
    with ``tape=None`` for every probe. At least ``samples_per_param``
    coordinates per parameter are probed (all of them for small tensors).
    """
    zero_grads(params)
    tape = Tape()
    tape.backward(loss_fn(tape))
    analytic = {p: p.grad.copy() for p in params}

    rng = np.random.default_rng(seed)
    report = FiniteDiffReport(max_rel_err=0.0, rel_tol=rel_tol)
    for p in params:
        size = p.value.size
        if size <= samples_per_param:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=samples_per_param, replace=False)
        flat = p.value.reshape(-1)
        worst = 0.0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            up = float(loss_fn(None).value[0, 0])
            flat[c] = orig - step
            dn = float(loss_fn(None).value[0, 0])
            flat[c] = orig
            numeric = (up - dn) / (2.0 * step)
            a = analytic[p].reshape(-1)[c]
            # unit floor: coordinates with near-zero gradients (dead ReLU
            # paths) are compared absolutely, not against FD round-off
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1.0)
            worst = max(worst, rel)
        report.per_param[p.name or repr(p)] = worst
        if worst > report.max_rel_err:
            report.max_rel_err = worst
            report.worst_param = p.name or repr(p)
    zero_grads(params)
    return report
