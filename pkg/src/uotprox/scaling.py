"""Scaling iterations for entropic KL-relaxed UOT.

The plain mode multiplies dual scalings ``u, v`` against a kernel ``K``;
the stabilized mode keeps ``log u, log v`` and a log-kernel and evaluates
every kernel reduction with a max-shifted log-sum-exp, so it never
underflows.  The sweep helpers take an arbitrary nonnegative kernel because
the proximal solvers run them on substituted kernels ``K * P``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .core import as_cost, objective_unchecked
from .errors import DomainError, NumericalOverflow, NumericalUnderflow
from .trace import SolveTrace, attach_on_failure


@dataclass(frozen=True)
class InnerStopRule:
    """How many scaling sweeps to run per proximal subproblem.

    ``mode="sweeps"`` runs exactly ``sweeps`` sweeps.  ``mode="residual"``
    sweeps until the marginal residual is ``<= tol``, giving up after
    ``max_sweeps``.
    """

    mode: str = "sweeps"
    sweeps: int = 1
    tol: float = 1e-10
    max_sweeps: int = 100_000

    def __post_init__(self):
        if self.mode not in ("sweeps", "residual"):
            raise ValueError(f"unknown inner stop mode {self.mode!r}")
        if self.sweeps < 1 or self.max_sweeps < 1:
            raise ValueError("sweep counts must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @classmethod
    def fixed(cls, sweeps=1):
        return cls(mode="sweeps", sweeps=int(sweeps))

    @classmethod
    def residual(cls, tol, max_sweeps=100_000):
        return cls(mode="residual", tol=float(tol), max_sweeps=int(max_sweeps))

    def as_dict(self):
        if self.mode == "sweeps":
            return {"mode": "sweeps", "sweeps": self.sweeps}
        return {"mode": "residual", "tol": self.tol, "max_sweeps": self.max_sweeps}


@dataclass(frozen=True)
class ScalingState:
    u: np.ndarray
    v: np.ndarray
    kernel: np.ndarray
    eps: float


def build_kernel(C, eps):
    """Gibbs kernel ``exp(-C / eps)``.

    Raises
    ------
    NumericalUnderflow
        If a whole row or column of the kernel is zero.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    C = as_cost(C)
    K = np.exp(-C / eps)
    check_kernel_support(K)
    return K


def check_kernel_support(K):
    if K.min() > 0:
        return
    if np.any(~K.any(axis=1)) or np.any(~K.any(axis=0)):
        raise NumericalUnderflow("kernel has an all-zero row or column")


def _scale(target, reduced, expo, side):
    # (target / reduced) ** expo.  A vanished kernel product shows up as inf
    # and an infinite one as 0, so checking the result catches both; the
    # input is only inspected to name the failure.  Solvers call this under
    # one np.errstate for the whole solve, since entering it per call costs
    # more than the arithmetic on small problems.
    out = (target / reduced) ** expo
    if not out.max() < np.inf:
        if not reduced.min() > 0:
            raise NumericalUnderflow(f"kernel product vanished in the {side}-update")
        raise NumericalOverflow(f"{side} scaling is not finite")
    if not out.min() > 0:
        raise NumericalUnderflow(f"{side} scaling underflowed to zero")
    return out


QUIET = dict(divide="ignore", over="ignore", invalid="ignore")


def u_update(K, v, a, lambda1, eps, Kv=None):
    """``(a / K v) ** (lambda1 / (lambda1 + eps))``; ``Kv`` may be passed if already known."""
    return _scale(a, K @ v if Kv is None else Kv, lambda1 / (lambda1 + eps), "u")


def v_update(K, u, b, lambda2, eps):
    return _scale(b, K.T @ u, lambda2 / (lambda2 + eps), "v")


def scaling_sweep(state, a, b, lambda1, lambda2):
    """One u-update (against the old v) followed by one v-update."""
    u = u_update(state.kernel, state.v, a, lambda1, state.eps)
    v = v_update(state.kernel, u, b, lambda2, state.eps)
    return replace(state, u=u, v=v)


def assemble_plan(state):
    """``Diag(u) K Diag(v)``."""
    return state.u[:, None] * state.kernel * state.v[None, :]


def marginal_residual(K, u, v, a, lambda1, eps, Kv=None):
    """``|| P 1 - a * u**(-eps/lambda1) ||_1`` for ``P = Diag(u) K Diag(v)``.

    Zero exactly when the row identity of the u-update holds at the current v.
    """
    rows = u * (K @ v if Kv is None else Kv)
    return float(np.abs(rows - a * u ** (-eps / lambda1)).sum())


def sweep_residual(u, Kv_old, Kv_new):
    """:func:`marginal_residual` from the kernel products around a v-update.

    The u-update makes ``a * u**(-eps/lambda1)`` equal to ``u * Kv_old``, so
    the residual after the v-update is ``sum(u * |Kv_new - Kv_old|)``.
    """
    return float((u * np.abs(Kv_new - Kv_old)).sum())


# log-domain variants ------------------------------------------------------

def _lse_rows(logK, logv):
    # log sum_j exp(logK_ij + logv_j), max-shifted per row
    return logsumexp(logK + logv[None, :], axis=1)


def log_u_update(logK, logv, a, lambda1, eps):
    return (lambda1 / (lambda1 + eps)) * (np.log(a) - _lse_rows(logK, logv))


def log_v_update(logK, logu, b, lambda2, eps):
    return (lambda2 / (lambda2 + eps)) * (np.log(b) - _lse_rows(logK.T, logu))


def log_assemble_plan(logK, logu, logv):
    return np.exp(logu[:, None] + logK + logv[None, :])


def log_marginal_residual(logK, logu, logv, a, lambda1, eps):
    rows = np.exp(logu + _lse_rows(logK, logv))
    return float(np.sum(np.abs(rows - a * np.exp(-eps / lambda1 * logu))))


def solve_entropic_uot(problem, eps, max_sweeps=1000, tol=1e-9, stabilized=False):
    """Solve the entropy-regularized UOT problem by scaling sweeps from ``v = 1``.

    Returns the plan and a trace with one record per sweep.  Record 0 is the
    bare kernel plan (``u = v = 1``); record ``k`` is the plan after ``k``
    sweeps, with the unregularized objective and the marginal residual.
    Stops once the residual is ``<= tol`` or after ``max_sweeps`` sweeps.

    Raises
    ------
    NumericalUnderflow, NumericalOverflow
        In plain mode, when a kernel product vanishes or a scaling leaves the
        floating-point range.  The stabilized mode does not raise these.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    a, b = problem.a, problem.b
    l1, l2 = problem.lambda1, problem.lambda2
    trace = SolveTrace(
        solver="scaling",
        params={"eps": eps, "max_sweeps": max_sweeps, "tol": tol, "stabilized": bool(stabilized)},
        problem_digest=problem.digest(),
    )
    trace.converged = False
    n, m = problem.shape

    with attach_on_failure(trace), np.errstate(**QUIET):
        if stabilized:
            logK = -problem.cost / eps
            logu, logv = np.zeros(n), np.zeros(m)
            plan = lambda: log_assemble_plan(logK, logu, logv)  # noqa: E731
        else:
            K = build_kernel(problem.cost, eps)
            u, v = np.ones(n), np.ones(m)
            Kv = K @ v
            plan = lambda: u[:, None] * K * v[None, :]  # noqa: E731

        trace.append(0, objective_unchecked(problem, plan()))
        for k in range(1, max_sweeps + 1):
            if stabilized:
                logu = log_u_update(logK, logv, a, l1, eps)
                logv = log_v_update(logK, logu, b, l2, eps)
                r = log_marginal_residual(logK, logu, logv, a, l1, eps)
            else:
                u = u_update(K, v, a, l1, eps, Kv=Kv)
                v = v_update(K, u, b, l2, eps)
                Kv_old, Kv = Kv, K @ v
                r = sweep_residual(u, Kv_old, Kv)
            P = plan()
            trace.append(k, objective_unchecked(problem, P), inner_sweeps=1, inner_residual=r)
            if r <= tol:
                trace.converged = True
                break
    trace.plan = P
    return P, trace
