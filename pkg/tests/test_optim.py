import numpy as np
import pytest

from caunet.optim import (
    AdamState,
    LrSchedule,
    MulUpdateState,
    adam_step,
    grad_split,
    mul_step,
    schedule_tick,
)


class TestGradSplit:
    def test_reconstruction(self, rng):
        g = rng.standard_normal((4, 5))
        plus, minus = grad_split(g, 1e-20)
        assert np.allclose(plus - minus, g)

    def test_strict_positivity(self, rng):
        plus, minus = grad_split(rng.standard_normal(100), 1e-20)
        assert np.all(plus > 0) and np.all(minus > 0)

    def test_pure_positive_gradient(self):
        plus, minus = grad_split(np.array([2.0]), 1e-20)
        assert plus[0] == pytest.approx(2.0)
        assert minus[0] == pytest.approx(1e-20)

    def test_zero_gradient(self):
        plus, minus = grad_split(np.zeros(3), 1e-6)
        assert np.all(plus == 1e-6) and np.all(minus == 1e-6)

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            grad_split(np.zeros(2), 0.0)


class TestMulStep:
    def test_stays_positive(self, rng):
        w = rng.uniform(0.01, 1.0, (6, 6)).astype(np.float32)
        state = MulUpdateState(eta=0.005)
        for _ in range(20):
            w = mul_step(w, rng.standard_normal((6, 6)), state)
        assert np.all(w > 0)

    def test_descends_on_positive_gradient(self):
        # positive gradient => ratio = eps/|g| < 1 => weight shrinks
        w = np.array([1.0])
        w2 = mul_step(w, np.array([0.5]), MulUpdateState(eta=0.005))
        assert w2[0] < w[0]

    def test_grows_on_negative_gradient(self):
        w = np.array([1.0])
        w2 = mul_step(w, np.array([-0.5]), MulUpdateState(eta=0.005))
        assert w2[0] > w[0]

    def test_fixed_point_at_zero_gradient(self):
        w = np.array([0.7, 0.3])
        w2 = mul_step(w, np.zeros(2), MulUpdateState(eta=0.1))
        assert np.allclose(w2, w)

    def test_float32_no_underflow(self):
        # (eps/|g|)^eta underflows float32 pow; log-space float64 must not
        w = np.full(3, 0.5, dtype=np.float32)
        w2 = mul_step(w, np.full(3, 1.0), MulUpdateState(eta=0.005, eps=1e-20))
        assert np.all(w2 > 0) and np.all(np.isfinite(w2))
        # expected multiplier exp(0.005 * ln(1e-20/1)) ~ 0.7942
        assert w2[0] == pytest.approx(0.5 * np.exp(0.005 * np.log(1e-20)), rel=1e-5)

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ValueError, match="strictly positive"):
            mul_step(np.array([0.0, 1.0]), np.ones(2), MulUpdateState(eta=0.1))

    def test_preserves_dtype(self):
        w = np.ones(2, dtype=np.float32)
        assert mul_step(w, np.ones(2), MulUpdateState(eta=0.01)).dtype == np.float32

    def test_bad_state(self):
        with pytest.raises(ValueError):
            MulUpdateState(eta=-1.0)


class TestAdam:
    def test_first_step_magnitude(self):
        # bias correction makes the very first step ~ alpha * sign(g)
        p = np.zeros(4)
        g = np.array([1.0, -2.0, 0.5, 3.0])
        out = adam_step(p, g, AdamState(alpha=0.01))
        assert np.allclose(out, -0.01 * np.sign(g), atol=1e-6)

    def test_minimizes_quadratic(self):
        p = np.array([5.0, -3.0])
        state = AdamState(alpha=0.1)
        for _ in range(500):
            p = adam_step(p, 2 * p, state)
        assert np.max(np.abs(p)) < 1e-3

    def test_state_mutation(self):
        state = AdamState(alpha=0.01)
        adam_step(np.zeros(2), np.ones(2), state)
        assert state.t == 1 and state.m is not None
        adam_step(np.zeros(2), np.ones(2), state)
        assert state.t == 2

    def test_zero_gradient_no_move(self):
        p = np.array([1.0, 2.0])
        out = adam_step(p, np.zeros(2), AdamState(alpha=0.5))
        assert np.array_equal(out, p)

    def test_preserves_dtype(self):
        p = np.ones(2, dtype=np.float32)
        assert adam_step(p, np.ones(2), AdamState(alpha=0.01)).dtype == np.float32


class TestSchedule:
    def test_decay_points(self):
        sched = LrSchedule(decay_factor=0.95, decay_every=500)
        a, e = schedule_tick(500, sched, 0.005, 0.005)
        assert a == pytest.approx(0.005 * 0.95) and e == pytest.approx(0.005 * 0.95)

    def test_no_decay_between(self):
        sched = LrSchedule()
        assert schedule_tick(499, sched, 1.0, 1.0) == (1.0, 1.0)
        assert schedule_tick(501, sched, 1.0, 1.0) == (1.0, 1.0)

    def test_compound_decay(self):
        sched = LrSchedule(decay_factor=0.5, decay_every=10)
        a = e = 1.0
        for step in range(1, 31):
            a, e = schedule_tick(step, sched, a, e)
        assert a == pytest.approx(0.125)
