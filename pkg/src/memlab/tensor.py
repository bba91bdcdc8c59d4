"""Dense float tensors with reverse-mode automatic differentiation.

Operations run eagerly on numpy arrays. While a :class:`GradTape` is active,
every op whose inputs require gradients appends a backward rule to the tape;
``backward(loss, tape)`` replays the rules in reverse recording order, which
is a valid topological order because execution is eager. Gradient
accumulation is additive: a tensor consumed twice receives the sum of both
contributions.

Training runs in float32; verification (``finite_difference_check``) runs in
float64.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import special as _special

from .errors import InputError, NumericError, UndefinedLossError, UsageError

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Additive attention-mask value. Large enough that exp() underflows to exactly
# 0.0 in float32 after max subtraction, small enough to stay finite.
MASK_NEG = -1.0e9


class Tensor:
    """A dense array plus gradient bookkeeping.

    ``grad`` stays ``None`` until ``backward`` reaches the tensor. Data is
    float32 or float64; integer payloads (token ids) stay plain numpy arrays.
    """

    __slots__ = ("data", "requires_grad", "grad", "_grad_borrowed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._grad_borrowed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # Convenience operators; the module-level functions are the real API.
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, _as_tensor(other, self.dtype))

    __radd__ = __add__
    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other, self.dtype))


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


class GradTape:
    """Ordered record of ops for one backward replay.

    Acts as a context manager that installs itself as the active tape.
    A tape can be replayed exactly once.
    """

    def __init__(self):
        self._ops: list[tuple[Tensor, Callable[[np.ndarray], None]]] = []
        self.consumed = False

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.pop()
        return False

    def _record(self, out: Tensor, backward_fn: Callable[[np.ndarray], None]):
        self._ops.append((out, backward_fn))

    def __len__(self):
        return len(self._ops)


_TAPE_STACK: list[GradTape] = []


def _active_tape() -> GradTape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _accum(t: Tensor, g: np.ndarray):
    """Add a gradient contribution.

    The first contribution is stored borrowed (no copy; g may alias an
    upstream buffer, so it is never mutated in place). A second contribution
    materializes a fresh owned array; only owned grads are updated in place.
    """
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
        t._grad_borrowed = True
    elif t._grad_borrowed:
        t.grad = t.grad + g
        t._grad_borrowed = False
    else:
        t.grad += g


def _make(out_data: np.ndarray, inputs: Sequence[Tensor], backward_fn) -> Tensor:
    rg = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=rg)
    tape = _active_tape()
    if rg and tape is not None:
        tape._record(out, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g down to `shape`, inverting numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / linear ops
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward_fn(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), backward_fn)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out_data = a.data * a.data.dtype.type(s)

    def backward_fn(g):
        _accum(a, g * a.data.dtype.type(s))

    return _make(out_data, (a,), backward_fn)


def add_const(a: Tensor, c: np.ndarray) -> Tensor:
    """Add a non-differentiable constant (e.g. an attention mask)."""
    out_data = a.data + c

    def backward_fn(g):
        _accum(a, _unbroadcast(g, a.data.shape))

    return _make(out_data, (a,), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = np.matmul(a.data, b.data)

    def backward_fn(g):
        _accum(a, np.matmul(g, b.data.swapaxes(-1, -2)))
        _accum(b, np.matmul(a.data.swapaxes(-1, -2), g))

    return _make(out_data, (a, b), backward_fn)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out_data = a.data.transpose(axes)

    def backward_fn(g):
        _accum(a, g.transpose(inv))

    return _make(out_data, (a,), backward_fn)


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    in_shape = a.data.shape
    out_data = a.data.reshape(shape)

    def backward_fn(g):
        _accum(a, g.reshape(in_shape))

    return _make(out_data, (a,), backward_fn)


def slice_rows(a: Tensor, n: int) -> Tensor:
    out_data = a.data[:n]

    def backward_fn(g):
        buf = np.zeros_like(a.data)
        buf[:n] = g
        _accum(a, buf)

    return _make(out_data, (a,), backward_fn)


def tsum(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def backward_fn(g):
        _accum(a, np.broadcast_to(g, a.data.shape))

    return _make(out_data, (a,), backward_fn)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def backward_fn(g):
        _accum(a, np.broadcast_to(g / n, a.data.shape))

    return _make(out_data, (a,), backward_fn)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather; backward scatter-adds into the table."""
    out_data = table.data[ids]

    def backward_fn(g):
        buf = np.zeros_like(table.data)
        np.add.at(buf, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        _accum(table, buf)

    return _make(out_data, (table,), backward_fn)


# ---------------------------------------------------------------------------
# nonlinearities and normalization
# ---------------------------------------------------------------------------

def gelu(x: Tensor) -> Tensor:
    """x * Phi(x) with the exact Gaussian CDF (erf form, no tanh approximation)."""
    if not np.isfinite(x.data).all():
        raise NumericError("gelu: input contains non-finite values")
    half = x.data.dtype.type(0.5)
    phi = _special.erf(x.data * x.data.dtype.type(_SQRT1_2))
    phi += 1.0
    phi *= half
    out_data = x.data * phi

    def backward_fn(g):
        pdf = x.data * x.data
        pdf *= -half
        np.exp(pdf, out=pdf)
        pdf *= x.data.dtype.type(_INV_SQRT_2PI)
        pdf *= x.data
        pdf += phi
        pdf *= g
        _accum(x, pdf)

    return _make(out_data, (x,), backward_fn)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    if not (-x.data.ndim <= axis < x.data.ndim):
        raise UsageError(f"softmax: axis {axis} invalid for shape {x.data.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=axis, keepdims=True)
    out_data = z

    def backward_fn(g):
        gy = g * out_data
        dot = gy.sum(axis=axis, keepdims=True)
        dot = out_data * dot
        gy -= dot
        _accum(x, gy)

    return _make(out_data, (x,), backward_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance (population), then affine."""
    d = x.data.shape[-1]
    if d < 2:
        raise UsageError("layer_norm: normalized axis extent must be >= 2")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + x.data.dtype.type(eps))
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def backward_fn(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gain, (g * xhat).sum(axis=lead))
        _accum(bias, g.sum(axis=lead))
        dxhat = g * gain.data
        dx = (inv / d) * (
            d * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
        )
        _accum(x, dx)

    return _make(out_data, (x, gain, bias), backward_fn)


def cross_entropy(logits: Tensor, targets: np.ndarray, ignore_mask: np.ndarray | None = None) -> Tensor:
    """Mean negative log-softmax probability of each target over non-ignored rows.

    ``logits`` is (positions, V); ``targets`` int ids in [0, V); ``ignore_mask``
    True marks rows excluded from the mean.
    """
    n, v = logits.data.shape
    targets = np.asarray(targets)
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise InputError(
            f"cross_entropy: target ids must lie in [0, {v}); got range "
            f"[{int(targets.min())}, {int(targets.max())}]"
        )
    if ignore_mask is None:
        scored = np.ones(n, dtype=bool)
    else:
        scored = ~np.asarray(ignore_mask, dtype=bool)
    n_scored = int(scored.sum())
    if n_scored == 0:
        raise UndefinedLossError("cross_entropy: every position is ignored")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    z_t = z[np.arange(n), targets]
    e = np.exp(z, out=z)  # z is consumed; e aliases it
    sumexp = e.sum(axis=1, keepdims=True)
    logp_t = z_t - np.log(sumexp[:, 0])
    loss = -(logp_t[scored].mean())
    out_data = np.asarray(loss, dtype=logits.data.dtype)

    def backward_fn(g):
        # One fused broadcast multiply applies softmax normalization, the
        # scored-row zeroing, and the 1/n_scored loss scale.
        gs = logits.data.dtype.type(float(g) / n_scored)
        w = np.where(scored, gs, logits.data.dtype.type(0.0)) / sumexp[:, 0]
        p = e * w[:, None]
        rows = np.flatnonzero(scored)
        p[rows, targets[rows]] -= gs
        _accum(logits, p)

    out = _make(out_data, (logits,), backward_fn)
    if not np.isfinite(out.data):
        raise NumericError("cross_entropy: non-finite loss")
    return out


# ---------------------------------------------------------------------------
# backward replay and verification
# ---------------------------------------------------------------------------

def backward(loss: Tensor, tape: GradTape):
    """Populate grads of every requires_grad tensor reachable from `loss`.

    Replays in reverse recording order. Each node's closure and intermediate
    grad are released as soon as it fires, so peak memory stays near the
    forward-pass footprint. Only leaf tensors keep their grads afterwards.
    """
    if tape.consumed:
        raise UsageError("backward: tape already consumed")
    if loss.data.size != 1:
        raise UsageError("backward: loss must be a scalar")
    if not loss.requires_grad:
        raise UsageError("backward: loss is not connected to any requires_grad tensor")
    loss.grad = np.ones_like(loss.data)
    ops = tape._ops
    for idx in range(len(ops) - 1, -1, -1):
        out, backward_fn = ops[idx]
        if out.grad is not None:
            backward_fn(out.grad)
        out.grad = None          # intermediates never appear as op inputs-only leaves
        out._grad_borrowed = False
        ops[idx] = None          # free the closure and the activations it pins
    tape.consumed = True
    tape._ops.clear()


def finite_difference_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    h: float = 1e-5,
    max_coords: int = 100,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    `x` should be float64; the relative error at a coordinate is
    |analytic - cd| / max(|analytic|, |cd|, 1e-8).
    """
    if x.data.dtype != np.float64:
        raise UsageError("finite_difference_check requires a float64 tensor")
    probe = Tensor(x.data.copy(), requires_grad=True)
    with GradTape() as tape:
        y = f(probe)
    backward(y, tape)
    analytic = probe.grad.reshape(-1).copy()

    n = probe.data.size
    if n <= max_coords:
        coords = np.arange(n)
    else:
        gen = rng if rng is not None else np.random.default_rng(0)
        coords = gen.choice(n, size=max_coords, replace=False)

    flat = probe.data.reshape(-1)
    max_err = 0.0
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f(Tensor(probe.data.copy())).item()
        flat[i] = orig - h
        f_minus = f(Tensor(probe.data.copy())).item()
        flat[i] = orig
        cd = (f_plus - f_minus) / (2.0 * h)
        a = analytic[i]
        err = abs(a - cd) / max(abs(a), abs(cd), 1e-8)
        max_err = max(max_err, err)
    return max_err
