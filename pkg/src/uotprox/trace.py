"""Per-iteration diagnostics shared by all solvers."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalError


@dataclass
class TraceRecord:
    k: int
    objective: float
    inner_sweeps: Optional[int] = None
    inner_residual: Optional[float] = None
    nu_hat: Optional[float] = None
    theta: Optional[float] = None
    rho: Optional[float] = None
    delta_hat: Optional[float] = None
    tau: Optional[float] = None
    wall_ns: Optional[int] = None


@dataclass
class SolveTrace:
    """Records for ``k = 0..N`` plus solver provenance.

    ``converged`` is only meaningful for solvers with a stopping tolerance;
    running out of iterations is never an error, the flag just stays False.
    """

    solver: str
    params: dict
    problem_digest: str
    records: list = field(default_factory=list)
    converged: Optional[bool] = None
    plan: Optional[np.ndarray] = None
    state: Optional[object] = None
    _t0: int = field(default_factory=time.perf_counter_ns, repr=False)

    def append(self, k, objective, **diag):
        rec = TraceRecord(k=k, objective=float(objective),
                          wall_ns=time.perf_counter_ns() - self._t0, **diag)
        self.records.append(rec)
        return rec

    @property
    def objectives(self):
        return np.array([r.objective for r in self.records])

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def __len__(self):
        return len(self.records)


@contextmanager
def attach_on_failure(trace):
    """Attach ``trace`` (records up to the failure) to a numerical error."""
    try:
        yield trace
    except NumericalError as exc:
        exc.trace = trace
        raise
