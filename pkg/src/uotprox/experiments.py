"""Benchmark protocol: the 1-D Gaussian preset, reference optimum, gaps, sparsity."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .accelerated import AccelConfig, solve_aibpuot
from .core import UotProblem
from .errors import DomainError, ProvenanceMismatch
from .proximal import ProxParams, solve_ibpuot
from .scaling import InnerStopRule, solve_entropic_uot

GRID = np.arange(1, 101, dtype=np.float64)
PRESETS = ("gaussian1d",)


def gaussian_pdf(x, mu, var):
    """Normal density with mean ``mu`` and variance ``var``."""
    if not var > 0:
        raise DomainError("variance must be positive")
    return np.exp(-(np.asarray(x, dtype=np.float64) - mu) ** 2 / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def build_gaussian_preset(std_interpretation=False):
    """Source N(20,5)+N(50,9) against target N(60,10) on the grid 1..100.

    The second parameter is a variance; ``std_interpretation=True`` reads it
    as a standard deviation instead.  Marginals are raw density samples (not
    renormalized), the cost is squared grid distance divided by its maximum,
    and ``lambda1 = lambda2 = 1``.
    """
    sq = (lambda s: s * s) if std_interpretation else (lambda s: s)
    a = gaussian_pdf(GRID, 20, sq(5)) + gaussian_pdf(GRID, 50, sq(9))
    b = gaussian_pdf(GRID, 60, sq(10))
    C = (GRID[:, None] - GRID[None, :]) ** 2
    C = C / C.max()
    return UotProblem(a, b, C, 1.0, 1.0)


def load_preset(name, **kwargs):
    if name != "gaussian1d":
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return build_gaussian_preset(**kwargs)


def random_problem(n, m, seed, lambda1=1.0, lambda2=1.0):
    """Marginals uniform in (0.5, 1.5), costs uniform in (0, 1)."""
    rng = np.random.default_rng(seed)
    return UotProblem(rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 1.5, m),
                      rng.uniform(0.0, 1.0, (n, m)), lambda1, lambda2)


def plan_digest(P):
    return hashlib.sha256(np.ascontiguousarray(P, dtype=np.float64).tobytes()).hexdigest()


@dataclass(frozen=True)
class ReferenceSolution:
    objective: float
    solver: str
    beta: float
    iters: int
    inner: dict
    problem_digest: str
    plan_digest: str


def compute_reference(problem, beta=0.005, iters=10_000, inner=None):
    """High-accuracy IBPUOT run whose final objective serves as ``f*``."""
    inner = InnerStopRule.fixed(1) if inner is None else inner
    P, trace = solve_ibpuot(problem, ProxParams(beta, iters, inner))
    return ReferenceSolution(objective=trace.records[-1].objective, solver="ibpuot",
                             beta=beta, iters=iters, inner=inner.as_dict(),
                             problem_digest=problem.digest(), plan_digest=plan_digest(P))


def gap_trace(trace, reference, clamp=1e-16):
    """``[(k, f(P^k) - f*)]``, floored at ``clamp`` (pass ``None`` for raw gaps)."""
    if trace.problem_digest != reference.problem_digest:
        raise ProvenanceMismatch("trace and reference were computed on different problems")
    out = []
    for rec in trace.records:
        gap = rec.objective - reference.objective
        if clamp is not None:
            gap = max(gap, clamp)
        out.append((rec.k, gap))
    return out


def gap_at(trace, reference, k, clamp=None):
    """Gap after ``k`` iterations.

    A solver that stopped early on its tolerance keeps its final plan, so
    the last recorded gap is used for any later ``k``.
    """
    gaps = gap_trace(trace, reference, clamp=clamp)
    return gaps[min(k, len(gaps) - 1)][1]


def sparsity_ratio(P, rel_threshold=1e-6):
    """Fraction of entries below ``rel_threshold * max(P)``."""
    P = np.asarray(P, dtype=np.float64)
    top = P.max()
    if not top > 0:
        raise DomainError("sparsity of an all-zero plan is undefined")
    return float(np.count_nonzero(P < rel_threshold * top) / P.size)


@dataclass
class SolverConfig:
    """One solver run: which method, its weight, and its iteration budget.

    ``weight`` is ``eps`` for ``scaling`` and ``beta`` for the proximal
    solvers.  For ``scaling``, ``iters`` caps the sweeps and ``tol`` is the
    marginal-residual stopping tolerance.
    """

    solver: str
    weight: float
    iters: int = 1000
    inner: InnerStopRule = field(default_factory=InnerStopRule)
    accel: AccelConfig = field(default_factory=AccelConfig)
    stabilized: bool = False
    tol: float = 1e-9
    label: Optional[str] = None

    def __post_init__(self):
        if self.solver not in ("scaling", "ibpuot", "aibpuot"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.weight > 0:
            raise ValueError("eps/beta must be positive")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.label is None:
            key = "eps" if self.solver == "scaling" else "beta"
            self.label = f"{self.solver} {key}={self.weight:g}"

    def run(self, problem):
        if self.solver == "scaling":
            return solve_entropic_uot(problem, self.weight, max_sweeps=self.iters,
                                      tol=self.tol, stabilized=self.stabilized)
        params = ProxParams(self.weight, self.iters, self.inner)
        if self.solver == "ibpuot":
            return solve_ibpuot(problem, params)
        return solve_aibpuot(problem, params, self.accel)

    @classmethod
    def from_dict(cls, d):
        """Build from a mapping such as one entry of a comparison spec file."""
        d = dict(d)
        solver = d.pop("solver")
        weight = d.pop("eps", None) if solver == "scaling" else d.pop("beta", None)
        if weight is None:
            raise ValueError(f"{solver} needs {'eps' if solver == 'scaling' else 'beta'}")
        if "inner_tol" in d:
            inner = InnerStopRule.residual(d.pop("inner_tol"))
        else:
            inner = InnerStopRule.fixed(d.pop("inner_sweeps", 1))
        accel = AccelConfig(sigma=d.pop("sigma", None), t_exp=d.pop("t_exp", 0.5),
                            tau_doubling=d.pop("tau_doubling", True))
        cfg = cls(solver=solver, weight=float(weight), iters=int(d.pop("iters", 1000)),
                  inner=inner, accel=accel, stabilized=bool(d.pop("stabilized", False)),
                  tol=float(d.pop("tol", 1e-9)), label=d.pop("label", None))
        if d:
            raise ValueError(f"unknown keys in solver config: {sorted(d)}")
        return cfg

