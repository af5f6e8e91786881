"""Inexact Bregman proximal point iterations for KL-relaxed UOT (IBPUOT).

Each outer step minimizes ``f(P) + beta * D_h(P, P_k)``.  That subproblem
is an entropic UOT problem with kernel ``G = exp(-C / beta) * P_k``, so it
is solved approximately by scaling sweeps on ``G``.  The shifted cost
``C - beta log P_k`` is never formed, which keeps zero entries of ``P_k``
out of the logarithm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .core import as_plan, gradient_unchecked, objective_unchecked
from .errors import DimensionMismatch
from .scaling import (
    QUIET,
    InnerStopRule,
    build_kernel,
    check_kernel_support,
    sweep_residual,
    u_update,
    v_update,
)
from .trace import SolveTrace, attach_on_failure


@dataclass(frozen=True)
class ProxParams:
    """Constant proximal weight, outer iteration count and inner stopping rule."""

    beta: float
    outer_iters: int
    inner: InnerStopRule = field(default_factory=InnerStopRule)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")

    def as_dict(self):
        return {"beta": self.beta, "outer_iters": self.outer_iters, "inner": self.inner.as_dict()}


def prox_kernel(P_prev, base_kernel):
    """Substituted kernel ``base_kernel * P_prev`` (entrywise)."""
    P_prev = np.asarray(P_prev, dtype=np.float64)
    base_kernel = np.asarray(base_kernel, dtype=np.float64)
    if P_prev.shape != base_kernel.shape:
        raise DimensionMismatch(f"{P_prev.shape} vs {base_kernel.shape}")
    G = base_kernel * P_prev
    check_kernel_support(G)
    return G


def run_inner(problem, G, v, beta, rule):
    """Scaling sweeps on kernel ``G`` with entropic weight ``beta``.

    Returns ``(u, v, sweeps, residual)``; ``v`` is the warm start and is not
    modified in place.
    """
    a, b = problem.a, problem.b
    l1, l2 = problem.lambda1, problem.lambda2
    limit = rule.sweeps if rule.mode == "sweeps" else rule.max_sweeps
    Gv = G @ v
    for sweeps in range(1, limit + 1):
        u = u_update(G, v, a, l1, beta, Kv=Gv)
        v = v_update(G, u, b, l2, beta)
        Gv_old, Gv = Gv, G @ v
        r = sweep_residual(u, Gv_old, Gv)
        if rule.mode == "residual" and r <= rule.tol:
            break
    return u, v, sweeps, r


def inexactness_estimate(problem, P_next, P_prev, beta):
    """Surrogate for the inexactness ``nu`` of a proximal step.

    Measures how far ``P_next`` is from stationarity of the proximal
    subproblem centred at ``P_prev``: the l1 norm of
    ``grad f(P_next) + beta (log P_next - log P_prev)`` over the entries
    where both plans are positive, multiplied by ``max(P_next)`` to turn a
    slope into an objective-scale quantity.  It is zero exactly when
    the subproblem's optimality condition holds on the support.
    """
    P_next = np.asarray(P_next, dtype=np.float64)
    P_prev = np.asarray(P_prev, dtype=np.float64)
    grad = gradient_unchecked(problem, P_next)
    if P_next.min() > 0 and P_prev.min() > 0:
        d = grad + beta * np.log(P_next / P_prev)
    else:
        supp = (P_next > 0) & (P_prev > 0)
        if not supp.any():
            return 0.0
        d = grad[supp] + beta * np.log(P_next[supp] / P_prev[supp])
    return float(np.abs(d).sum() * P_next.max())


def ibpuot_step(problem, P_prev, params, warm_v, base_kernel=None):
    """One inexact proximal step from ``P_prev``.

    Returns ``(P_next, v, diagnostics)`` where ``v`` is the warm start to
    carry into the next step and ``diagnostics`` holds ``inner_sweeps``,
    ``inner_residual`` and ``nu_hat``.
    """
    beta = params.beta
    if base_kernel is None:
        base_kernel = build_kernel(problem.cost, beta)
    G = prox_kernel(P_prev, base_kernel)
    u, v, sweeps, r = run_inner(problem, G, warm_v, beta, params.inner)
    P_next = u[:, None] * G * v[None, :]
    diag = {
        "inner_sweeps": sweeps,
        "inner_residual": r,
        "nu_hat": inexactness_estimate(problem, P_next, P_prev, beta),
    }
    return P_next, v, diag


def solve_ibpuot(problem, params, P0=None):
    """Run ``params.outer_iters`` inexact proximal steps from ``P0`` (default all-ones).

    The dual scaling ``v`` starts at ones once and is carried across outer
    iterations.  The trace holds ``outer_iters + 1`` records, record 0 being
    the starting plan.
    """
    n, m = problem.shape
    P = np.ones((n, m)) if P0 is None else as_plan(P0, (n, m)).copy()
    v = np.ones(m)
    trace = SolveTrace(solver="ibpuot", params=params.as_dict(), problem_digest=problem.digest())
    trace.append(0, objective_unchecked(problem, P))

    with attach_on_failure(trace), np.errstate(**QUIET):
        K = build_kernel(problem.cost, params.beta)
        for k in range(params.outer_iters):
            P, v, diag = ibpuot_step(problem, P, params, v, base_kernel=K)
            trace.append(k + 1, objective_unchecked(problem, P), **diag)
    if params.inner.mode == "residual":
        trace.converged = all(r.inner_residual <= params.inner.tol for r in trace.records[1:])
    trace.plan = P
    return P, trace

