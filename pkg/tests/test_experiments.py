import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from uotprox.core import uot_objective
from uotprox.errors import DomainError, ProvenanceMismatch
from uotprox.experiments import (
    ReferenceSolution,
    SolverConfig,
    build_gaussian_preset,
    compute_reference,
    gap_at,
    gap_trace,
    gaussian_pdf,
    load_preset,
    sparsity_ratio,
)
from uotprox.proximal import ProxParams, solve_ibpuot
from uotprox.scaling import InnerStopRule

from conftest import small_problem


@pytest.mark.parametrize(
    "x, mu, var, expected",
    [(20, 20, 5, 1 / math.sqrt(10 * math.pi)), (7, 7, 10, 1 / math.sqrt(20 * math.pi))],
)
def test_gaussian_pdf_peak(x, mu, var, expected):
    assert_allclose(gaussian_pdf(x, mu, var), expected, rtol=1e-15)


def test_gaussian_pdf_symmetric():
    d = np.linspace(0, 30, 31)
    assert_allclose(gaussian_pdf(50 + d, 50, 9), gaussian_pdf(50 - d, 50, 9), rtol=0)


def test_gaussian_pdf_bad_variance():
    with pytest.raises(DomainError):
        gaussian_pdf(0.0, 0.0, 0.0)


class TestPreset:
    def test_structure(self, preset):
        assert preset.shape == (100, 100)
        assert preset.a.min() > 0 and preset.b.min() > 0
        C = preset.cost
        assert C.min() == 0.0 and C.max() == 1.0
        assert np.all(np.diag(C) == 0.0)
        assert C[0, 99] == 1.0
        assert preset.lambda1 == preset.lambda2 == 1.0

    def test_source_at_20(self, preset):
        second = gaussian_pdf(20, 50, 9)
        assert second < 1e-20
        assert_allclose(preset.a[19], 1 / math.sqrt(10 * math.pi), rtol=1e-15)

    def test_deterministic(self, preset):
        assert build_gaussian_preset().digest() == preset.digest()

    def test_std_interpretation_differs(self, preset):
        alt = build_gaussian_preset(std_interpretation=True)
        assert_allclose(alt.b[59], 1 / math.sqrt(200 * math.pi), rtol=1e-15)
        assert alt.digest() != preset.digest()

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            load_preset("gaussian2d")


class TestReference:
    def test_bit_exact_rerun(self, preset):
        r1 = compute_reference(preset, iters=50)
        r2 = compute_reference(preset, iters=50)
        assert r1 == r2

    def test_below_start(self, preset, reference):
        assert reference.objective <= uot_objective(preset, np.ones(preset.shape))
        assert (reference.beta, reference.iters, reference.solver) == (0.005, 10000, "ibpuot")

    def test_ibpuot_approaches_from_above(self, preset, reference):
        _, trace = solve_ibpuot(preset, ProxParams(1.0, 2000, InnerStopRule.fixed(1)))
        gaps = np.array([g for _, g in gap_trace(trace, reference, clamp=None)])
        assert gaps.min() >= -1e-8

    def test_beta_sweep(self, preset, reference):
        final = {}
        for beta in (0.1, 1.0):
            _, trace = solve_ibpuot(preset, ProxParams(beta, 2000, InnerStopRule.fixed(1)))
            final[beta] = gap_at(trace, reference, 2000)
        assert final[0.1] <= final[1.0]


class TestGapTrace:
    def setup_method(self):
        self.problem = small_problem(4, 4, seed=1)
        self.params = ProxParams(0.2, 30, InnerStopRule.residual(1e-12))

    def test_reference_run_itself(self):
        _, trace = solve_ibpuot(self.problem, self.params)
        ref = compute_reference(self.problem, beta=0.2, iters=30, inner=self.params.inner)
        gaps = gap_trace(trace, ref)
        assert gaps[-1] == (30, 1e-16)
        assert [k for k, _ in gaps] == list(range(31))

    def test_monotone_with_tight_inner(self):
        _, trace = solve_ibpuot(self.problem, self.params)
        ref = compute_reference(self.problem, beta=0.2, iters=2000, inner=self.params.inner)
        gaps = np.array([g for _, g in gap_trace(trace, ref, clamp=None)])
        assert np.all(np.diff(gaps) <= 1e-12)

    def test_provenance(self):
        _, trace = solve_ibpuot(self.problem, self.params)
        other = ReferenceSolution(0.0, "ibpuot", 0.005, 1, {}, small_problem(4, 4, seed=2).digest(), "")
        with pytest.raises(ProvenanceMismatch):
            gap_trace(trace, other)

    def test_gap_at_after_early_stop(self):
        _, trace = solve_ibpuot(self.problem, self.params)
        ref = ReferenceSolution(0.0, "ibpuot", 0.2, 30, {}, self.problem.digest(), "")
        assert gap_at(trace, ref, 1000) == trace.records[-1].objective


class TestSparsity:
    def test_identity(self):
        assert_allclose(sparsity_ratio(np.eye(3)), 6 / 9)

    def test_all_ones(self):
        assert sparsity_ratio(np.ones((4, 5))) == 0.0

    def test_threshold_is_relative(self):
        P = np.array([[1e6, 0.5], [0.9, 1e6]])
        assert sparsity_ratio(P, 1e-6) == 0.5

    def test_zero_plan(self):
        with pytest.raises(DomainError):
            sparsity_ratio(np.zeros((2, 2)))


class TestSolverConfig:
    def test_labels(self):
        assert SolverConfig("scaling", 0.01).label == "scaling eps=0.01"
        assert SolverConfig("aibpuot", 1.0).label == "aibpuot beta=1"

    def test_from_dict(self):
        cfg = SolverConfig.from_dict({"solver": "aibpuot", "beta": 0.1, "iters": 20, "inner_tol": 1e-9,
                                      "sigma": 0.2, "t_exp": 0.3, "tau_doubling": False, "label": "x"})
        assert cfg.inner.mode == "residual" and cfg.accel.sigma == 0.2 and cfg.label == "x"
        assert not cfg.accel.tau_doubling and cfg.iters == 20

    @pytest.mark.parametrize(
        "d",
        [
            {"solver": "scaling", "beta": 1.0},
            {"solver": "ibpuot", "beta": 1.0, "colour": "red"},
            {"solver": "mm", "beta": 1.0},
            {"solver": "ibpuot", "beta": -1.0},
            {"solver": "ibpuot", "beta": 1.0, "iters": 0},
        ],
    )
    def test_from_dict_rejects(self, d):
        with pytest.raises(ValueError):
            SolverConfig.from_dict(d)

    @pytest.mark.parametrize("solver, weight", [("scaling", 0.1), ("ibpuot", 0.5), ("aibpuot", 0.5)])
    def test_run(self, solver, weight):
        P, trace = SolverConfig(solver, weight, iters=10).run(small_problem(3, 3))
        assert trace.solver == solver and P.shape == (3, 3)
