"""Accelerated inexact Bregman proximal point method (AIBPUOT).

Nesterov-style estimate sequence on top of :mod:`uotprox.proximal`: each
step proxes from the intermediate point ``Y = theta Z + (1 - theta) P``
instead of ``P``, and ``Z`` (the minimizer of the estimate function) is
updated multiplicatively.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import objective_unchecked
from .errors import DimensionMismatch, DomainError, NumericalOverflow
from .proximal import inexactness_estimate, prox_kernel, run_inner
from .scaling import QUIET, build_kernel
from .trace import SolveTrace, attach_on_failure

TAU_DOUBLING_THRESHOLD = 0.125


@dataclass(frozen=True)
class AccelConfig:
    """Estimate-sequence parameters.

    sigma : weight of the initial estimate function; ``None`` means ``beta``.
    t_exp : triangle scaling exponent is ``gamma = 1 + t_exp``.
    tsc0 : initial triangle scaling constant ``tau``.
    tau_doubling : double ``tau`` whenever ``tau * theta**t_exp < 0.125``.
    """

    sigma: Optional[float] = None
    t_exp: float = 0.5
    tsc0: float = 1.0
    tau_doubling: bool = True

    def __post_init__(self):
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 <= self.t_exp < 1:
            raise ValueError("t_exp must lie in [0, 1)")
        if not self.tsc0 > 0:
            raise ValueError("tsc0 must be positive")

    def as_dict(self, beta):
        return {"sigma": beta if self.sigma is None else self.sigma, "t_exp": self.t_exp,
                "tsc0": self.tsc0, "tau_doubling": self.tau_doubling}


@dataclass
class AccelState:
    Z: np.ndarray
    rho: float
    theta: float
    tsc: float
    tse: float
    sigma: float
    t_exp: float
    delta_hat: float = 0.0


def solve_theta(tsc, beta, gamma, sigma, rho):
    """Root in (0, 1) of ``tsc * beta * theta**gamma = sigma * rho * (1 - theta)``.

    The left side increases and the right side decreases in theta, so the
    root is unique.
    """
    if not (tsc > 0 and beta > 0 and sigma > 0 and rho > 0 and gamma >= 1):
        raise DomainError("solve_theta needs positive parameters and gamma >= 1")
    A = tsc * beta
    B = sigma * rho
    if gamma == 1:
        return B / (A + B)

    def g(t):
        return A * t ** gamma - B * (1.0 - t)

    # t**gamma <= t on (0, 1) puts the root in [B / (A + B), 1]
    lo = B / (A + B)
    if g(lo) == 0:
        return lo
    theta = brentq(g, lo, 1.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    # one Newton polish step; brentq stops on bracket width, not residual
    dg = gamma * A * theta ** (gamma - 1) + B
    polished = theta - g(theta) / dg
    if 0 < polished < 1 and abs(g(polished)) <= abs(g(theta)):
        theta = polished
    return theta


def intermediate_point(Z, P, theta):
    """``theta Z + (1 - theta) P``."""
    Z = np.asarray(Z, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if Z.shape != P.shape:
        raise DimensionMismatch(f"{Z.shape} vs {P.shape}")
    return theta * Z + (1.0 - theta) * P


def update_tau(tsc, theta, t_exp):
    if tsc * theta ** t_exp < TAU_DOUBLING_THRESHOLD:
        return 2.0 * tsc
    return tsc


def update_z(Z_prev, P_next, Y, tsc, theta, gamma):
    """Multiplicative estimate-sequence update ``Z * (P_next / Y)**s``.

    ``s = theta**(1 - gamma) / tsc``.  An entry with ``Y == 0`` has
    ``Z == 0`` and ``P_next == 0`` already (Y is a positive combination of
    Z and P, and P_next inherits zeros of Y through the kernel), so it stays 0.
    """
    Z_prev = np.asarray(Z_prev, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    P_next = np.asarray(P_next, dtype=np.float64)
    if np.any(Y < 0):
        raise DomainError("intermediate point has negative entries")
    s = theta ** (1.0 - gamma) / tsc
    ratio = np.zeros_like(Y)
    pos = Y > 0
    ratio[pos] = (P_next[pos] / Y[pos]) ** s
    Z = Z_prev * ratio
    if not np.all(np.isfinite(Z)):
        raise NumericalOverflow("estimate-sequence minimizer overflowed")
    return Z


def solve_aibpuot(problem, params, accel=None):
    """Accelerated proximal iterations from ``P0 = Z0 = ones``.

    Per outer step: pick theta from the current rho, prox from the
    intermediate point with the inner scaling rule of ``params``, update Z,
    ``rho <- (1 - theta) rho``, ``delta_hat <- (1 - theta) delta_hat + nu_hat``,
    then possibly double tau.  Record ``k`` carries the theta and tau used in
    step ``k - 1`` and the rho and delta_hat after it.
    """
    accel = AccelConfig() if accel is None else accel
    n, m = problem.shape
    beta = params.beta
    gamma = 1.0 + accel.t_exp
    state = AccelState(Z=np.ones((n, m)), rho=1.0, theta=float("nan"), tsc=accel.tsc0,
                       tse=gamma, sigma=beta if accel.sigma is None else accel.sigma,
                       t_exp=accel.t_exp)
    P = np.ones((n, m))
    v = np.ones(m)
    trace = SolveTrace(solver="aibpuot",
                       params={**params.as_dict(), **accel.as_dict(beta)},
                       problem_digest=problem.digest())
    trace.append(0, objective_unchecked(problem, P), rho=1.0, delta_hat=0.0, tau=state.tsc)

    with attach_on_failure(trace), np.errstate(**QUIET):
        K = build_kernel(problem.cost, beta)
        for k in range(params.outer_iters):
            theta = solve_theta(state.tsc, beta, gamma, state.sigma, state.rho)
            Y = intermediate_point(state.Z, P, theta)
            G = prox_kernel(Y, K)
            u, v, sweeps, r = run_inner(problem, G, v, beta, params.inner)
            P_next = u[:, None] * G * v[None, :]
            nu_hat = inexactness_estimate(problem, P_next, Y, beta)
            tau_used = state.tsc

            state.Z = update_z(state.Z, P_next, Y, state.tsc, theta, gamma)
            state.theta = theta
            state.rho = (1.0 - theta) * state.rho
            state.delta_hat = (1.0 - theta) * state.delta_hat + nu_hat
            if accel.tau_doubling:
                state.tsc = update_tau(state.tsc, theta, accel.t_exp)
            P = P_next
            trace.append(k + 1, objective_unchecked(problem, P), inner_sweeps=sweeps, inner_residual=r,
                         nu_hat=nu_hat, theta=theta, rho=state.rho, delta_hat=state.delta_hat,
                         tau=tau_used)
    if params.inner.mode == "residual":
        trace.converged = all(r.inner_residual <= params.inner.tol for r in trace.records[1:])
    trace.plan = P
    trace.state = state
    return P, trace
