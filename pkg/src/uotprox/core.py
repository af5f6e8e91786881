"""Problem definition, divergences and the KL-relaxed UOT objective.

Measures, cost matrices and transport plans are plain float64 numpy arrays;
:func:`as_measure`, :func:`as_cost` and :func:`as_plan` validate them.
Everything here follows the convention ``0 * log 0 = 0``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError


def _as_float_array(x, ndim=None, name="array"):
    arr = np.asarray(x, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    return arr


def as_measure(values, name="measure", strict=False):
    """Validate a discrete measure (nonnegative vector of length >= 1)."""
    arr = _as_float_array(values, ndim=1, name=name)
    if arr.size < 1:
        raise DimensionMismatch(f"{name} must have at least one entry")
    if strict and np.any(arr <= 0):
        raise DomainError(f"{name} must be strictly positive")
    if np.any(arr < 0):
        raise DomainError(f"{name} has negative entries")
    return arr


def as_cost(entries, shape=None):
    """Validate a nonnegative finite cost matrix, optionally against ``shape``."""
    arr = _as_float_array(entries, ndim=2, name="cost")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatch(f"cost has shape {arr.shape}, expected {tuple(shape)}")
    if np.any(arr < 0):
        raise DomainError("cost has negative entries")
    return arr


def as_plan(entries, shape=None):
    """Validate a transport plan (nonnegative finite matrix)."""
    arr = _as_float_array(entries, ndim=2, name="plan")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionMismatch(f"plan has shape {arr.shape}, expected {tuple(shape)}")
    if np.any(arr < 0):
        raise DomainError("plan has negative entries")
    return arr


@dataclass(frozen=True, eq=False)
class UotProblem:
    """A discrete KL-relaxed unbalanced transport instance.

    Marginals must be strictly positive; zero entries are rejected rather
    than clamped.
    """

    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    lambda1: float = 1.0
    lambda2: float = 1.0

    def __post_init__(self):
        a = as_measure(self.a, "a", strict=True)
        b = as_measure(self.b, "b", strict=True)
        cost = as_cost(self.cost, (a.size, b.size))
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise DomainError("lambda1 and lambda2 must be positive")
        for name, arr in (("a", a), ("b", b), ("cost", cost)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))

    @property
    def shape(self):
        return (self.a.size, self.b.size)

    def digest(self):
        """Hex SHA-256 of the exact problem data."""
        h = hashlib.sha256()
        h.update(np.asarray(self.shape, dtype=np.int64).tobytes())
        for arr in (self.a, self.b, self.cost):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(np.asarray([self.lambda1, self.lambda2]).tobytes())
        return h.hexdigest()


def _kl_terms(x, y):
    # x log(x/y) - x + y entrywise, 0 where x == 0 leaves y.  Near x == y the
    # direct form cancels badly, so there it is y * phi(s) with s = (x - y)/y
    # and phi(s) = (1 + s) log1p(s) - s, which is exactly 0 at x == y.
    d = x - y
    near = np.abs(d) < 0.5 * y
    if near.all():
        s = d / y
        return y * ((1.0 + s) * np.log1p(s) - s)
    out = y.copy()
    s = d[near] / y[near]
    out[near] = y[near] * ((1.0 + s) * np.log1p(s) - s)
    far = ~near & (x > 0)
    xf, yf = x[far], y[far]
    out[far] = xf * (np.log(xf) - np.log(yf)) - xf + yf
    return out


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes differ: {x.shape} vs {y.shape}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise DomainError("second argument must be finite and strictly positive")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise DomainError("first argument must be finite and nonnegative")
    return x, y


def kl_divergence(x, y):
    """Generalized KL divergence ``sum x log(x/y) - x + y`` for nonnegative vectors."""
    x, y = _check_pair(x, y)
    return float(np.sum(_kl_terms(x, y)))


def bregman_entropy(x, y):
    """Bregman distance generated by the entropy ``h(x) = sum x (log x - 1)``.

    Works on vectors or matrices of equal shape; equal to the generalized KL
    divergence of the flattened arrays.  Evaluated entrywise in a form that
    stays accurate (and positive) for arguments within rounding of each other.
    """
    x, y = _check_pair(x, y)
    return float(np.sum(_kl_terms(x, y)))


def entropy_h(P):
    """``sum P (log P - 1)`` with zero entries contributing nothing."""
    P = np.asarray(P, dtype=np.float64)
    if not np.all(np.isfinite(P)):
        raise DomainError("entropy of non-finite input")
    if np.any(P < 0):
        raise DomainError("entropy of negative entries")
    pos = P > 0
    return float(np.sum(P[pos] * (np.log(P[pos]) - 1.0)))


def uot_objective(problem, P):
    """Primal objective ``<C, P> + l1 KL(P 1 | a) + l2 KL(P^T 1 | b)``."""
    return objective_unchecked(problem, as_plan(P, problem.shape))


def objective_unchecked(problem, P):
    # solver hot path: P is known to be a valid plan of the right shape
    return (float(np.sum(problem.cost * P))
            + problem.lambda1 * _kl_unchecked(P.sum(axis=1), problem.a)
            + problem.lambda2 * _kl_unchecked(P.sum(axis=0), problem.b))


def _kl_unchecked(x, y):
    return float(np.sum(_kl_terms(x, y)))


def uot_gradient(problem, P):
    """Analytic gradient of :func:`uot_objective`; needs positive row and column sums."""
    return gradient_unchecked(problem, as_plan(P, problem.shape))


def gradient_unchecked(problem, P):
    rows = P.sum(axis=1)
    cols = P.sum(axis=0)
    if rows.min() <= 0 or cols.min() <= 0:
        raise DomainError("gradient undefined where a row or column of P is empty")
    return (problem.cost
            + problem.lambda1 * np.log(rows / problem.a)[:, None]
            + problem.lambda2 * np.log(cols / problem.b)[None, :])
