"""Reference solutions that share no machinery with the scaling solvers.

Everything here works on the primal objective directly: a closed form for
1x1 instances, projected gradient descent for small ones, and central
finite differences for gradient checks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import uot_gradient, uot_objective
from .errors import DomainError, NotConvergedWarning

MAX_ORACLE_ENTRIES = 100
FLOOR = 1e-300


@dataclass(frozen=True)
class OracleResult:
    plan: np.ndarray
    objective: float
    method: str  # "closed_form_1x1" or "projected_descent"
    certified_tol: float
    iterations: int = 0
    converged: bool = True


def closed_form_1x1(a, b, c, lambda1=1.0, lambda2=1.0):
    """Minimizer of the 1x1 problem, root of ``c + l1 log(p/a) + l2 log(p/b) = 0``."""
    if not (a > 0 and b > 0 and lambda1 > 0 and lambda2 > 0):
        raise DomainError("closed_form_1x1 needs positive a, b, lambda1, lambda2")
    s = lambda1 + lambda2
    return math.exp((lambda1 * math.log(a) + lambda2 * math.log(b) - c) / s)


def closed_form_result(problem):
    if problem.shape != (1, 1):
        raise DomainError("closed form only exists for 1x1 problems")
    p = closed_form_1x1(problem.a[0], problem.b[0], problem.cost[0, 0],
                        problem.lambda1, problem.lambda2)
    plan = np.array([[p]])
    grad = uot_gradient(problem, plan)
    return OracleResult(plan=plan, objective=uot_objective(problem, plan),
                        method="closed_form_1x1", certified_tol=float(np.abs(grad).max()))


def projected_gradient_norm(P, grad):
    """Infinity norm of ``P - max(P - grad, 0)``."""
    return float(np.max(np.abs(P - np.maximum(P - grad, 0.0))))


def projected_descent_reference(problem, iters=200_000, tol=1e-10):
    """Minimize the primal objective over ``P >= 0`` by projected gradient descent.

    Starts from all-ones; each step backtracks along the projection arc from
    step 1.0, halving until the Armijo condition (constant 1e-4) holds.
    Entries are floored at 1e-300 so row and column sums stay positive.
    Stops when the projected-gradient infinity norm is ``<= tol``.  If that
    never happens, or no step makes progress, a :class:`NotConvergedWarning` is issued and the result
    reports the norm actually reached.
    """
    n, m = problem.shape
    if n * m > MAX_ORACLE_ENTRIES:
        raise DomainError(f"oracle limited to {MAX_ORACLE_ENTRIES} entries, got {n * m}")
    P = np.ones((n, m))
    f = uot_objective(problem, P)
    grad = uot_gradient(problem, P)
    pg = projected_gradient_norm(P, grad)
    it = 0
    while pg > tol and it < iters:
        it += 1
        # Near the optimum the Armijo decrease drops below the rounding noise
        # of f; inside that band a step must shrink the projected gradient,
        # and a Newton step on the free entries is tried if descent cannot.
        noise = 64 * np.finfo(float).eps * max(1.0, abs(f))
        step_to = _descent_trial(problem, P, f, grad, pg, noise)
        if step_to is None:
            step_to = _newton_trial(problem, P, grad, pg)
        if step_to is None:
            break
        P, f, grad, pg = step_to
    converged = pg <= tol
    if not converged:
        warnings.warn(f"projected descent stopped at projected gradient {pg:.3e} > {tol:.1e}",
                      NotConvergedWarning, stacklevel=2)
    return OracleResult(plan=P, objective=f, method="projected_descent", certified_tol=pg,
                        iterations=it, converged=converged)


def _evaluate(problem, trial):
    g = uot_gradient(problem, trial)
    return trial, uot_objective(problem, trial), g, projected_gradient_norm(trial, g)


def _descent_trial(problem, P, f, grad, pg, noise):
    step = 1.0
    while step >= 1e-20:
        cand = _evaluate(problem, np.maximum(P - step * grad, FLOOR))
        f_trial, pg_trial = cand[1], cand[3]
        if abs(f_trial - f) <= noise:
            ok = pg_trial < pg
        else:
            ok = f_trial <= f + 1e-4 * np.sum(grad * (cand[0] - P))
        if ok:
            return cand
        step *= 0.5
    return None


def _newton_trial(problem, P, grad, pg):
    # Hessian of f restricted to the free entries:
    # H[(i,j),(k,l)] = l1/r_i [i=k] + l2/c_j [j=l].  It is singular along
    # cycles of the support, where f is linear, so take the min-norm step.
    n, m = P.shape
    free = ~((P <= FLOOR) & (grad > 0))
    idx = np.flatnonzero(free)
    i, j = np.divmod(idx, m)
    rows, cols = P.sum(axis=1), P.sum(axis=0)
    H = (problem.lambda1 / rows[i])[:, None] * (i[:, None] == i[None, :]) \
        + (problem.lambda2 / cols[j])[:, None] * (j[:, None] == j[None, :])
    d = np.linalg.lstsq(H, -grad.ravel()[idx], rcond=None)[0]
    step = 1.0
    while step >= 1e-10:
        trial = P.copy().ravel()
        trial[idx] = np.maximum(trial[idx] + step * d, FLOOR)
        cand = _evaluate(problem, trial.reshape(n, m))
        if cand[3] < pg:
            return cand
        step *= 0.5
    return None


def finite_diff_gradient(problem, P, step=None):
    """Central-difference gradient of the primal objective at a positive plan."""
    P = np.asarray(P, dtype=np.float64)
    if np.any(P <= 0):
        raise DomainError("finite differences need a strictly positive plan")
    if step is None:
        step = 1e-6 * max(1.0, float(P.max()))
    G = np.empty_like(P)
    for idx in np.ndindex(P.shape):
        hi = P.copy()
        lo = P.copy()
        hi[idx] += step
        lo[idx] -= step
        G[idx] = (uot_objective(problem, hi) - uot_objective(problem, lo)) / (2 * step)
    return G
