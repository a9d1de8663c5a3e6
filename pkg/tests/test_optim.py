import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ffinr import optim
from ffinr.errors import InvalidInputError, NumericAbort
from ffinr.optim import (
    INTERIOR, NEG_SLOPE, NON_POS_INTERCEPT, AdamMoments, LineSearchConfig, TrainState,
    adam_step, armijo_adjust, compute_k_b, gd_step, line_search_alpha, train_step,
)

CFG = LineSearchConfig()


def expected_branch(k, b):
    # the printed case table, evaluated in order
    if k >= 0 and b <= 0:
        return NON_POS_INTERCEPT
    if (k >= 0 and b >= 0) or (k <= 0 and b <= 0):
        return INTERIOR
    return NEG_SLOPE


def test_defaults():
    assert (CFG.alpha_max, CFG.alpha_min, CFG.epsilon, CFG.c1) == (1e-3, 0.0, 1e-6, 1e-3)


@pytest.mark.parametrize("kw", [dict(alpha_min=1.0), dict(epsilon=0.0), dict(c1=1.0), dict(c1=0.0),
                                dict(inr_schedule="cosine"), dict(filter_lr_mode="adam")])
def test_config_validation(kw):
    with pytest.raises(InvalidInputError):
        LineSearchConfig(**kw).validate()


class TestGdStep:
    def test_zero_alpha(self):
        assert gd_step([np.array([1.0])], [np.array([5.0])], 0.0)[0].tolist() == [1.0]

    def test_scalar(self):
        assert gd_step([np.array([1.0])], [np.array([2.0])], 0.1)[0][0] == pytest.approx(0.8)

    def test_quadratic_bowl_monotone(self):
        theta = [np.array([3.0, -2.0])]
        losses = []
        for _ in range(100):
            losses.append(float(np.sum(theta[0] ** 2)))
            theta = gd_step(theta, [2 * theta[0]], 0.05)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_non_finite(self):
        with pytest.raises(NumericAbort):
            gd_step([np.zeros(1)], [np.array([np.nan])], 0.1)


class TestKB:
    def test_slope(self):
        g = [np.array([2.0, 0.0])]
        k, _ = compute_k_b(g, [-g[0]], [np.zeros(1)], [np.zeros(1)], 0.0, CFG)
        assert k == pytest.approx(4 + 1e-6, abs=1e-15)

    def test_intercept(self):
        gI, pI = [np.array([5.0])], [np.array([-10.0])]
        _, b = compute_k_b([np.zeros(1)], [np.zeros(1)], gI, pI, 1.0, CFG)
        assert b == pytest.approx(1.05)

    def test_zero_gradients(self):
        z = [np.zeros(3)]
        assert compute_k_b(z, z, z, z, 0.5, CFG) == (1e-6, 0.5)


class TestLineSearch:
    def test_hand_traces(self):
        assert line_search_alpha(0.5, 0.001, CFG) == (1e-3, INTERIOR)
        assert line_search_alpha(1.0, -0.2, CFG) == (0.0, NON_POS_INTERCEPT)
        assert line_search_alpha(-1.0, 0.3, CFG) == (0.0, NEG_SLOPE)

    def test_interior_unclipped(self):
        a, br = line_search_alpha(100.0, 0.05, CFG)
        assert br == INTERIOR and a == pytest.approx(5e-4)

    @pytest.mark.parametrize("k", [-1.0, 0.0, 1.0])
    @pytest.mark.parametrize("b", [-1.0, 0.0, 1.0])
    def test_sign_grid(self, k, b):
        alpha, branch = line_search_alpha(k, b, CFG)
        assert branch == expected_branch(k, b)
        if branch == INTERIOR:
            root = math.inf if k == 0 else abs(b / k)
            assert alpha == min(max(root, CFG.alpha_min), CFG.alpha_max)
        else:
            assert alpha == CFG.alpha_min

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_bounds_property(self, k, b):
        alpha, branch = line_search_alpha(k, b, CFG)
        assert CFG.alpha_min <= alpha <= CFG.alpha_max
        assert branch == expected_branch(k, b)


class TestArmijo:
    def test_hand_trace(self):
        assert armijo_adjust(-4.0, -0.1, 0.0, CFG) == pytest.approx(0.025)

    def test_guard_fails_passes_candidate(self):
        assert not optim.armijo_guard(1.0, 1.0, CFG.c1)
        assert armijo_adjust(1.0, 1.0, 7e-4, CFG) == 7e-4

    def test_opposite_signs(self):
        assert optim.armijo_guard(-4.0, 0.1, CFG.c1)
        assert armijo_adjust(-4.0, 0.1, 5e-4, CFG) == CFG.alpha_min

    def test_zero_gApA(self):
        assert optim.armijo_guard(0.0, -1.0, CFG.c1)
        assert armijo_adjust(0.0, -1.0, 5e-4, CFG) == CFG.alpha_min


class TestAdam:
    def test_zero_grads(self):
        p = [np.array([1.0, 2.0])]
        m = AdamMoments([np.array([0.5, 0.5])], [np.array([0.1, 0.1])], 3)
        new_p, new_m = adam_step(p, [np.zeros(2)], m, 0.1)
        assert np.array_equal(new_m.m[0], 0.9 * m.m[0])
        assert np.array_equal(new_m.v[0], 0.999 * m.v[0])
        # no gradient, but stored momentum still moves the parameters
        assert np.all(new_p[0] < p[0])

    def test_first_step_is_sign(self):
        p, _ = adam_step([np.array([0.0])], [np.array([-3.0])], AdamMoments.zeros_like([np.zeros(1)]), 0.01)
        assert p[0][0] == pytest.approx(0.01, rel=1e-6)

    def test_three_step_trace(self):
        lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
        theta, m, v = 1.0, 0.0, 0.0
        ref = []
        for t in range(1, 4):
            g = 2 * theta
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
            ref.append(theta)
        p, mom = [np.array([1.0])], AdamMoments.zeros_like([np.zeros(1)])
        for t in range(3):
            p, mom = adam_step(p, [2 * p[0]], mom, lr)
            assert abs(p[0][0] - ref[t]) <= 1e-12


def quadratic_objective(target):
    def objective(tA, tI, batch):
        r = tA[0] - target
        return float(np.sum(r * r)), [2 * r], [np.zeros_like(tI[0])]
    return objective


class TestTrainStep:
    def test_frozen_inr_reduces_to_case_table(self):
        cfg = LineSearchConfig(alpha_I=0.0, alpha_max=1.0)
        state = TrainState.start([np.array([1.0])], [np.array([0.0])])
        new, d = train_step(state, None, cfg, quadratic_objective(np.array([0.0])))
        # loss 1, gradient 2 -> k = 4 + eps, b = 1, interior root 1/(4 + eps)
        assert d.branch == INTERIOR
        assert d.alpha_candidate == pytest.approx(1 / (4 + 1e-6))
        # gIpI = 0 and gApA = -4 satisfy the guard; the ratio is 0 -> alpha_min
        assert d.armijo_applied and d.alpha_A_used == 0.0
        assert new.iteration == 1 and new.loss_history == [1.0]

    def test_histories_and_bounds(self):
        cfg = LineSearchConfig()
        rng = np.random.default_rng(0)
        A = rng.standard_normal((6, 3))
        y = rng.standard_normal(6)

        def objective(tA, tI, batch):
            pred = A @ (tA[0] * tI[0])
            r = pred - y
            gpred = 2 * A.T @ r / r.size
            return float(np.mean(r * r)), [gpred * tI[0]], [gpred * tA[0]]

        state = TrainState.start([np.ones(3)], [np.full(3, 0.5)])
        first = None
        for _ in range(50):
            state, d = train_step(state, None, cfg, objective)
            first = first or d.loss
            assert cfg.alpha_min <= d.alpha_A_used <= cfg.alpha_max
        assert len(state.alpha_A_history) == len(state.loss_history) == state.iteration == 50
        assert state.loss_history[-1] < first

    def test_linearised_loss_not_worse_than_alpha_min(self):
        cfg = LineSearchConfig(alpha_I=0.0)
        for target in ([0.0, 0.0], [3.0, -1.0], [10.0, 10.0]):
            state = TrainState.start([np.array([1.0, 2.0])], [np.zeros(1)])
            _, d = train_step(state, None, cfg, quadratic_objective(np.array(target)))
            lin = lambda a: d.k_slope * a + d.b_intercept
            assert lin(d.alpha_A_used) <= lin(cfg.alpha_min) + 1e-15 or d.k_slope < 0

    def test_deterministic(self):
        cfg = LineSearchConfig()
        obj = quadratic_objective(np.array([0.3, -0.2]))
        runs = []
        for _ in range(2):
            s = TrainState.start([np.array([1.0, 1.0])], [np.zeros(2)])
            for _ in range(5):
                s, _ = train_step(s, None, cfg, obj)
            runs.append(s.filter_params[0].tobytes())
        assert runs[0] == runs[1]

    def test_non_finite_loss_aborts_with_dump(self):
        state = TrainState.start([np.zeros(1)], [np.zeros(1)])
        with pytest.raises(NumericAbort) as info:
            train_step(state, None, CFG, lambda a, i, b: (math.nan, [np.zeros(1)], [np.zeros(1)]))
        assert info.value.dump["iteration"] == 0

    def test_frozen_inr_arrays_do_not_move(self):
        state = TrainState.start([np.zeros(1)], [np.ones(2), np.ones(1)], inr_frozen=[False, True])
        obj = lambda a, i, b: (1.0, [np.ones(1)], [np.ones(2), np.ones(1)])
        new, _ = train_step(state, None, CFG, obj)
        assert np.array_equal(new.inr_params[1], np.ones(1))
        assert not np.array_equal(new.inr_params[0], np.ones(2))

    def test_schedule_mode(self):
        cfg = LineSearchConfig(filter_lr_mode="schedule", total_iters=10, lambda_final=0.1)
        s = TrainState.start([np.ones(1)], [np.zeros(1)])
        alphas = []
        for _ in range(10):
            s, d = train_step(s, None, cfg, quadratic_objective(np.zeros(1)))
            alphas.append(d.alpha_A_used)
        assert alphas[0] == pytest.approx(1e-3)
        assert all(b < a for a, b in zip(alphas, alphas[1:]))
