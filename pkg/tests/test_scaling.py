import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from uotprox.core import UotProblem
from uotprox.errors import DomainError, NumericalUnderflow
from uotprox.scaling import (
    InnerStopRule,
    ScalingState,
    assemble_plan,
    build_kernel,
    scaling_sweep,
    solve_entropic_uot,
    u_update,
    v_update,
)

from conftest import small_problem


class TestKernel:
    def test_zero_cost(self):
        assert_allclose(build_kernel(np.zeros((2, 2)), 1.0), np.ones((2, 2)))

    def test_unit_cost(self):
        assert_allclose(build_kernel([[1.0]], 1.0), [[math.exp(-1)]], rtol=1e-15)

    def test_underflow(self):
        with pytest.raises(NumericalUnderflow):
            build_kernel([[800.0]], 1.0)

    def test_partial_underflow_allowed(self):
        K = build_kernel([[0.0, 800.0], [800.0, 0.0]], 1.0)
        assert K[0, 1] == 0.0 and K[0, 0] == 1.0

    def test_bad_eps(self):
        with pytest.raises(DomainError):
            build_kernel([[0.0]], 0.0)


class TestInnerStopRule:
    def test_fixed(self):
        rule = InnerStopRule.fixed(3)
        assert (rule.mode, rule.sweeps) == ("sweeps", 3)

    def test_residual(self):
        assert InnerStopRule.residual(1e-10).as_dict()["tol"] == 1e-10

    @pytest.mark.parametrize("kw", [{"sweeps": 0}, {"tol": 0.0}, {"mode": "both"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            InnerStopRule(**kw)


class TestSweep:
    def test_u_is_one_when_kv_matches(self):
        K = np.array([[0.5, 0.25], [1.0, 0.5]])
        v = np.array([1.0, 2.0])
        assert_allclose(u_update(K, v, K @ v, 1.0, 0.3), [1.0, 1.0], rtol=1e-15)

    def test_1x1_u(self):
        assert_allclose(u_update(np.ones((1, 1)), np.ones(1), np.array([4.0]), 1.0, 1.0), [2.0])

    def test_small_eps_limit_is_balanced_row_step(self):
        K = np.array([[0.5, 0.25], [1.0, 0.5]])
        v = np.array([1.0, 2.0])
        a = np.array([3.0, 1.0])
        assert_allclose(u_update(K, v, a, 1.0, 1e-14), a / (K @ v), rtol=1e-12)

    def test_order_u_then_v(self, rng):
        K = rng.uniform(0.1, 1, (3, 4))
        a, b = rng.uniform(0.5, 1.5, 3), rng.uniform(0.5, 1.5, 4)
        st = ScalingState(np.ones(3), rng.uniform(0.5, 2, 4), K, 0.2)
        new = scaling_sweep(st, a, b, 1.0, 2.0)
        u = u_update(K, st.v, a, 1.0, 0.2)
        assert_allclose(new.u, u, rtol=0)
        assert_allclose(new.v, v_update(K, u, b, 2.0, 0.2), rtol=0)

    @pytest.mark.parametrize("seed", range(5))
    def test_marginal_identities(self, seed):
        rng = np.random.default_rng(seed)
        n, m, eps, l1, l2 = 6, 4, 0.3, 1.5, 0.7
        K = build_kernel(rng.uniform(0, 1, (n, m)), eps)
        a, b = rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 1.5, m)
        v = np.ones(m)
        for _ in range(20):
            u = u_update(K, v, a, l1, eps)
            P = u[:, None] * K * v[None, :]
            assert_allclose(P.sum(axis=1), a * u ** (-eps / l1), rtol=1e-12)
            v = v_update(K, u, b, l2, eps)
            P = u[:, None] * K * v[None, :]
            assert_allclose(P.sum(axis=0), b * v ** (-eps / l2), rtol=1e-12)

    def test_vanished_product_raises(self):
        K = np.array([[0.0, 1.0], [0.0, 1.0]])
        with np.errstate(divide="ignore"), pytest.raises(NumericalUnderflow):
            u_update(K, np.array([1.0, 0.0]), np.ones(2), 1.0, 1.0)


class TestAssemble:
    def test_ones(self):
        st = ScalingState(np.ones(2), np.ones(2), np.ones((2, 2)), 1.0)
        assert_allclose(assemble_plan(st), np.ones((2, 2)))

    def test_product(self):
        st = ScalingState(np.array([2.0]), np.array([3.0]), np.array([[0.5]]), 1.0)
        assert_allclose(assemble_plan(st), [[3.0]])

    def test_zero_kernel_entries_stay_zero(self):
        st = ScalingState(np.array([2.0, 5.0]), np.array([3.0, 7.0]), np.array([[0.0, 1.0], [1.0, 0.0]]), 1.0)
        P = assemble_plan(st)
        assert P[0, 0] == 0.0 and P[1, 1] == 0.0


class TestSolve:
    @pytest.mark.parametrize("eps", [0.01, 1.0, 10.0])
    def test_trivial_fixed_point(self, eps):
        P, trace = solve_entropic_uot(UotProblem([1], [1], [[0]]), eps)
        assert_allclose(P, [[1.0]], rtol=1e-15)
        assert trace.records[1].inner_residual == 0.0
        assert trace.converged and len(trace) == 2

    def test_optimality_at_convergence(self):
        p = small_problem(5, 4, seed=3, lambda1=1.3, lambda2=0.8)
        eps = 0.1
        P, trace = solve_entropic_uot(p, eps, max_sweeps=100000, tol=1e-12)
        assert trace.converged
        cond = (p.cost + eps * np.log(P) + p.lambda1 * np.log(P.sum(1) / p.a)[:, None]
                + p.lambda2 * np.log(P.sum(0) / p.b)[None, :])
        assert np.abs(cond[P > 1e-300]).max() <= 1e-8

    def test_stabilized_matches_plain(self):
        p = small_problem(6, 5, seed=1)
        P1, t1 = solve_entropic_uot(p, 0.05, max_sweeps=5000, tol=1e-13)
        P2, t2 = solve_entropic_uot(p, 0.05, max_sweeps=5000, tol=1e-13, stabilized=True)
        assert_allclose(P2, P1, rtol=1e-9)

    def test_balanced_limit(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(0.5, 1.5, 5)
        b = rng.uniform(0.5, 1.5, 5)
        b *= a.sum() / b.sum()
        p = UotProblem(a, b, rng.uniform(0, 1, (5, 5)), 1e6, 1e6)
        P, _ = solve_entropic_uot(p, 0.05, max_sweeps=20000, tol=1e-12)
        assert np.abs(P.sum(1) - a).sum() <= 1e-3
        assert np.abs(P.sum(0) - b).sum() <= 1e-3

    def test_not_converged_flag(self):
        _, trace = solve_entropic_uot(small_problem(), 0.01, max_sweeps=3, tol=1e-15)
        assert trace.converged is False and len(trace) == 4

    def test_preset_regularization_bias(self, preset, reference):
        # f(P^l) undershoots early, then rises monotonically to a biased limit
        _, trace = solve_entropic_uot(preset, 0.01, max_sweeps=20000, tol=1e-10)
        assert trace.converged
        obj = trace.objectives
        tail = np.diff(obj[len(obj) // 2:])
        assert np.all(tail >= -1e-15)
        assert obj[-1] - reference.objective > 1e-3

    def test_preset_underflow_plain(self, preset):
        with pytest.raises(NumericalUnderflow) as info:
            solve_entropic_uot(preset, 1e-4)
        assert len(info.value.trace) >= 1

    def test_preset_stabilized_finite(self, preset):
        _, trace = solve_entropic_uot(preset, 1e-4, max_sweeps=50, stabilized=True)
        assert np.all(np.isfinite(trace.objectives))

    def test_validation(self):
        with pytest.raises(DomainError):
            solve_entropic_uot(small_problem(), 0.0)
        with pytest.raises(ValueError):
            solve_entropic_uot(small_problem(), 1.0, max_sweeps=0)
