"""Solvers for discrete KL-relaxed unbalanced optimal transport.

Entropic scaling, inexact Bregman proximal point iterations (IBPUOT) and
their accelerated variant (AIBPUOT), plus an independent reference solver
and a benchmark harness.
"""
from .accelerated import AccelConfig, solve_aibpuot, solve_theta
from .core import UotProblem, bregman_entropy, entropy_h, kl_divergence, uot_gradient, uot_objective
from .errors import (
    DimensionMismatch,
    DomainError,
    NotConvergedWarning,
    NumericalError,
    NumericalOverflow,
    NumericalUnderflow,
    ProvenanceMismatch,
)
from .experiments import build_gaussian_preset, compute_reference, gap_trace, load_preset, sparsity_ratio
from .oracle import closed_form_1x1, projected_descent_reference
from .proximal import ProxParams, solve_ibpuot
from .scaling import InnerStopRule, solve_entropic_uot

__version__ = "0.1.0"

__all__ = [
    "AccelConfig", "DimensionMismatch", "DomainError", "InnerStopRule", "NotConvergedWarning",
    "NumericalError", "NumericalOverflow", "NumericalUnderflow", "ProvenanceMismatch",
    "ProxParams", "UotProblem", "bregman_entropy", "build_gaussian_preset", "closed_form_1x1",
    "compute_reference", "entropy_h", "gap_trace", "kl_divergence", "load_preset",
    "projected_descent_reference",
    "solve_aibpuot", "solve_entropic_uot", "solve_ibpuot", "solve_theta", "sparsity_ratio",
    "uot_gradient", "uot_objective",
]
