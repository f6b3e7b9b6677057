"""Finite-difference solver for sigma_k Hessian-type equations on Riemannian boxes.

The equation is sigma_k(lambda(Delta u g - nabla^2 u + chi)) = f(x, u, grad u)
with Dirichlet data. The package also ships sampling checks of the cone
calculus for the function h(lambda) = sigma_k(mu(lambda))^(1/k).
"""
from ._kernels import BACKEND
from .errors import (
    AdmissibilityError,
    ConeDomainError,
    ConfigError,
    HessianError,
    MetricError,
    NumericError,
    SamplingError,
)
from .geometry import Grid, MetricField
from .operator import check_subsolution, linearize, residual
from .problem import ProblemSpec, build_problem
from .solver import SolveReport, SolverConfig, continuity_solve, newton_solve, verify_sandwich
from .symfun import ConeSpec, h_eval, sigma

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "AdmissibilityError", "ConeDomainError", "ConfigError", "HessianError", "MetricError",
    "NumericError", "SamplingError", "Grid", "MetricField", "check_subsolution", "linearize", "residual",
    "ProblemSpec", "build_problem", "SolveReport", "SolverConfig", "continuity_solve", "newton_solve",
    "verify_sandwich", "ConeSpec", "h_eval", "sigma",
]
