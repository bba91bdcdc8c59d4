import numpy as np
import pytest

from memlab.errors import ConfigError, NumericError
from memlab.optim import AdamState, LrSchedule, adam_step, default_schedule, lr_at
from memlab.tensor import Tensor


class TestLrSchedule:
    def test_boundaries_exact(self):
        s = LrSchedule(max_lr=3e-3, warmup_tokens=1000, total_tokens=100_000)
        assert lr_at(s, 0) == 0.0
        assert lr_at(s, 1000) == 3e-3
        assert lr_at(s, 100_000) == 0.0
        assert lr_at(s, 200_000) == 0.0

    def test_decay_midpoint(self):
        s = LrSchedule(max_lr=2e-3, warmup_tokens=1000, total_tokens=101_000)
        mid = 1000 + (101_000 - 1000) / 2
        assert abs(lr_at(s, mid) - 1e-3) < 1e-12

    def test_piecewise_linear_continuous_nonneg_max_at_w(self):
        s = LrSchedule(max_lr=1e-3, warmup_tokens=3_750, total_tokens=1_000_000)
        grid = np.linspace(0, 1_100_000, 10_001)
        vals = np.array([lr_at(s, t) for t in grid])
        assert np.all(vals >= 0)
        assert vals.max() <= s.max_lr + 1e-15
        assert abs(lr_at(s, s.warmup_tokens) - s.max_lr) < 1e-15
        # continuity: adjacent grid points differ by at most the segment slope * step
        step = grid[1] - grid[0]
        max_slope = s.max_lr / s.warmup_tokens
        assert np.abs(np.diff(vals)).max() <= max_slope * step * (1 + 1e-9)
        # piecewise linear: second差 is zero away from the two breakpoints
        inner = vals[(grid > s.warmup_tokens + step) & (grid < s.total_tokens - step)]
        assert np.abs(np.diff(inner, 2)).max() < 1e-15

    def test_invalid_warmup(self):
        with pytest.raises(ConfigError):
            LrSchedule(max_lr=1e-3, warmup_tokens=0, total_tokens=10)
        with pytest.raises(ConfigError):
            LrSchedule(max_lr=1e-3, warmup_tokens=10, total_tokens=10)

    def test_default_warmup_fraction(self):
        s = default_schedule(max_lr=1e-3, total_tokens=100_000_000)
        assert s.warmup_tokens == pytest.approx(375_000)


def make_params(rng, shapes=((3, 4), (5,))):
    return {f"p{i}": Tensor(rng.normal(size=s).astype(np.float32), requires_grad=True)
            for i, s in enumerate(shapes)}


class TestAdam:
    def test_zero_grad_fixed_point(self):
        rng = np.random.default_rng(0)
        params = make_params(rng)
        before = {k: p.data.copy() for k, p in params.items()}
        st = AdamState.for_params(params)
        for _ in range(5):
            for p in params.values():
                p.grad = np.zeros_like(p.data)
            adam_step(params, st, lr=1e-2)
        for k, p in params.items():
            assert np.array_equal(p.data, before[k])
        assert st.t == 5

    def test_first_step_is_signed_lr(self):
        # bias correction at t=1 makes the update ~ -lr * sign(g)
        p = {"w": Tensor(np.zeros(4, dtype=np.float32), requires_grad=True)}
        st = AdamState()
        st.m["w"] = np.zeros(4, dtype=np.float32)
        st.v["w"] = np.zeros(4, dtype=np.float32)
        g = np.array([0.5, -2.0, 1e-3, -1e-3], dtype=np.float32)
        p["w"].grad = g.copy()
        adam_step(p, st, lr=1e-2)
        assert np.allclose(p["w"].data, -1e-2 * np.sign(g), rtol=1e-3)

    def test_bias_corrected_defaults(self):
        st = AdamState()
        assert (st.beta1, st.beta2, st.eps) == (0.9, 0.98, 1e-8)

    def test_convex_quadratic_improves(self):
        # loss = 0.5*||x - c||^2, gradient x - c; 100 steps must beat start
        rng = np.random.default_rng(1)
        c = rng.normal(size=8).astype(np.float32)
        params = {"x": Tensor(np.zeros(8, dtype=np.float32), requires_grad=True)}
        st = AdamState.for_params(params)
        loss0 = 0.5 * float(((params["x"].data - c) ** 2).sum())
        for _ in range(100):
            params["x"].grad = params["x"].data - c
            adam_step(params, st, lr=5e-2)
        loss1 = 0.5 * float(((params["x"].data - c) ** 2).sum())
        assert loss1 < loss0

    def test_update_invariance_bitwise(self):
        rng = np.random.default_rng(2)
        g = rng.normal(size=(3, 4)).astype(np.float32)

        def run():
            params = {"w": Tensor(np.full((3, 4), 0.25, dtype=np.float32), requires_grad=True)}
            st = AdamState.for_params(params)
            for _ in range(3):
                params["w"].grad = g.copy()
                adam_step(params, st, lr=1e-3)
            return params["w"].data

        assert np.array_equal(run(), run())

    def test_nonfinite_grad_aborts(self):
        params = {"w": Tensor(np.ones(3, dtype=np.float32), requires_grad=True)}
        st = AdamState.for_params(params)
        params["w"].grad = np.array([1.0, np.nan, 0.0], dtype=np.float32)
        with pytest.raises(NumericError):
            adam_step(params, st, lr=1e-3)

    def test_missing_grad_aborts(self):
        params = {"w": Tensor(np.ones(3, dtype=np.float32), requires_grad=True)}
        st = AdamState.for_params(params)
        with pytest.raises(NumericError):
            adam_step(params, st, lr=1e-3)

    def test_moments_decay_toward_zero_on_zero_grad(self):
        params = {"w": Tensor(np.ones(2, dtype=np.float32), requires_grad=True)}
        st = AdamState.for_params(params)
        params["w"].grad = np.ones(2, dtype=np.float32)
        adam_step(params, st, lr=1e-3)
        m1 = np.abs(st.m["w"]).max()
        for _ in range(10):
            params["w"].grad = np.zeros(2, dtype=np.float32)
            adam_step(params, st, lr=1e-3)
        assert np.abs(st.m["w"]).max() < m1 * 0.5
