"""Fast self-contained property checks, one line of output per property.

These re-verify the core numeric contracts against independent references
(finite differences, counting, closed forms) in under a couple of minutes
on one core. The pytest suite covers the same ground more thoroughly; this
module exists so a deployed install can be sanity-checked without pytest.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .model import TransformerConfig, build_model, forward
from .optim import AdamState, LrSchedule, adam_step, lr_at
from .tensor import Tensor, finite_difference_check


def _check_op_grads() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(10):
        x = Tensor(rng.normal(size=(4, 7)), dtype=np.float64)
        w = Tensor(rng.normal(size=(4, 7)), dtype=np.float64)
        tgt = rng.integers(0, 7, size=4)
        for f in (
            lambda t: T.tsum(T.gelu(t)),
            lambda t: T.tsum(T.mul(T.softmax(t, -1), w)),
            lambda t: T.cross_entropy(t, tgt),
        ):
            worst = max(worst, finite_difference_check(f, x, rng=np.random.default_rng(i)))
    return worst < 1e-4, f"max rel err {worst:.2e}"


def _check_transformer_grads() -> tuple[bool, str]:
    cfg = TransformerConfig(n_layers=2, n_heads=2, d_model=8, vocab_size=11, max_seq_len=8)
    model = build_model(cfg, seed=3, dtype=np.float64)
    for name, p in model.params.items():
        if not name.endswith((".g", ".b")):
            p.data *= 6.0  # move weights off the near-zero-gradient init point
    ids = np.array([[1, 4, 7, 2]])
    tgts = ids[0, 1:]
    worst = 0.0
    for pname in model.params:
        base = model.params[pname]

        def f(t, _pname=pname, _base=base):
            model.params[_pname] = t
            try:
                logits = forward(model, ids)
                flat = T.reshape(logits, (4, 11))
                return T.cross_entropy(T.slice_rows(flat, 3), tgts)
            finally:
                model.params[_pname] = _base

        probe = Tensor(base.data.copy(), dtype=np.float64)
        worst = max(worst, finite_difference_check(f, probe, max_coords=20,
                                                   rng=np.random.default_rng(1)))
    return worst < 1e-4, f"max rel err {worst:.2e}"


def _check_softmax_rows() -> tuple[bool, str]:
    rng = np.random.default_rng(0)
    x = rng.normal(scale=20, size=(64, 33)).astype(np.float32)
    y = T.softmax(Tensor(x), -1).data
    ok = bool(np.all(y >= 0) and np.all(y <= 1)
              and np.abs(y.sum(axis=1) - 1).max() < 1e-6)
    return ok, f"row-sum dev {np.abs(y.sum(axis=1) - 1).max():.1e}"


def _check_schedule() -> tuple[bool, str]:
    s = LrSchedule(max_lr=1e-3, warmup_tokens=3750, total_tokens=1_000_000)
    ok = (lr_at(s, 0) == 0.0 and lr_at(s, s.warmup_tokens) == s.max_lr
          and lr_at(s, s.total_tokens) == 0.0)
    grid = np.linspace(0, s.total_tokens, 10_000)
    vals = np.array([lr_at(s, t) for t in grid])
    ok = ok and bool(np.all(vals >= 0) and vals.max() <= s.max_lr)
    return ok, "boundaries exact, non-negative, max at warmup end"


def _check_adam_fixed_point() -> tuple[bool, str]:
    params = {"w": Tensor(np.ones((3, 3), dtype=np.float32), requires_grad=True)}
    st = AdamState.for_params(params)
    before = params["w"].data.copy()
    for _ in range(3):
        params["w"].grad = np.zeros_like(before)
        adam_step(params, st, lr=1e-2)
    return bool(np.array_equal(params["w"].data, before)), "zero grad leaves params"


def _check_mask_rate() -> tuple[bool, str]:
    from .corpus import Document, apply_mlm_mask, build_vocab, pack_sequences

    rng = np.random.default_rng(0)
    doc = Document(sentences=[[f"t{i}" for i in rng.integers(0, 99, 100)]
                              for _ in range(10_000)])
    vocab = build_vocab([doc], 200)
    seqs = pack_sequences([doc], vocab, max_len=512)
    total = masked = 0
    for s in seqs:
        ms = apply_mlm_mask(s, vocab, p=0.15, seed=42)
        total += len(s)
        masked += len(ms.mask_layout.positions)
    rate = masked / total
    return (0.149 <= rate <= 0.151 and total >= 1_000_000), f"rate {rate:.5f} over {total} positions"


def _check_metric_oracles() -> tuple[bool, str]:
    from .metrics import memory_unit_lengths, rolling_average, threshold_crossing

    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.normal(size=int(rng.integers(1, 25)))
        w = int(rng.integers(1, 7))
        got = rolling_average(x, w)
        want = [np.mean(x[max(0, i + 1 - w): i + 1]) for i in range(len(x))]
        if not np.allclose(got, want, atol=1e-12):
            return False, "rolling average mismatch"
        series = np.clip(np.cumsum(rng.uniform(-0.1, 0.2, size=12)), 0, 1)
        tau = float(rng.uniform(0.05, 0.95))
        c = threshold_crossing(series, tau)
        first = next((i for i, v in enumerate(series, 1) if v >= tau), None)
        if c.index != first:
            return False, "threshold crossing mismatch"
        bm = rng.random(20) < 0.5
        stats = memory_unit_lengths([bm])
        if sum(l * c2 for l, c2 in stats.histogram.items()) != int(bm.sum()):
            return False, "memory unit histogram weight mismatch"
    return True, "100 randomized instances each"


CHECKS = [
    ("op gradients vs central differences", _check_op_grads),
    ("transformer gradients vs central differences", _check_transformer_grads),
    ("softmax rows are probability vectors", _check_softmax_rows),
    ("LR schedule boundary values", _check_schedule),
    ("Adam zero-gradient fixed point", _check_adam_fixed_point),
    ("MLM mask rate at p=0.15", _check_mask_rate),
    ("metric oracles (rolling/crossing/units)", _check_metric_oracles),
]


def run_property_checks(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok = all_ok and ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
