"""Adam with bias correction and a linear warmup/decay LR schedule in tokens.

Weight decay is identically zero and there is no gradient clipping; the
schedule ramps 0 -> max_lr over the warmup tokens W, then decays linearly
to 0 at the total token budget. Default warmup is 0.375% of the budget,
preserving the 375M-in-100B warmup fraction at small scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .tensor import Tensor

WARMUP_FRACTION = 0.00375


@dataclass
class LrSchedule:
    max_lr: float
    warmup_tokens: float
    total_tokens: float

    def __post_init__(self):
        if not (0 < self.warmup_tokens < self.total_tokens):
            raise ConfigError(
                f"need 0 < warmup ({self.warmup_tokens}) < total ({self.total_tokens})"
            )
        if self.max_lr <= 0:
            raise ConfigError("max_lr must be positive")


def lr_at(schedule: LrSchedule, tokens_processed: float) -> float:
    """Piecewise-linear rate: 0 at 0, max_lr at W, back to 0 at the budget end."""
    t, w, total = float(tokens_processed), schedule.warmup_tokens, schedule.total_tokens
    if t < 0:
        raise ConfigError("tokens_processed must be >= 0")
    if t < w:
        return schedule.max_lr * (t / w)
    if t >= total:
        return 0.0
    return schedule.max_lr * ((total - t) / (total - w))


def default_schedule(max_lr: float, total_tokens: float) -> LrSchedule:
    return LrSchedule(
        max_lr=max_lr,
        warmup_tokens=WARMUP_FRACTION * total_tokens,
        total_tokens=total_tokens,
    )


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, Tensor]) -> "AdamState":
        state = cls()
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float):
    """One bias-corrected Adam update in place; clears grads afterwards.

    Raises NumericError (run abort) on any missing or non-finite gradient.
    """
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            raise NumericError(f"adam_step: parameter {name!r} has no gradient")
        if not np.isfinite(g).all():
            raise NumericError(f"adam_step: non-finite gradient in {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if lr != 0.0:
            mhat = m / c1
            vhat = v / c2
            p.data -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.data.dtype, copy=False)
        p.grad = None
