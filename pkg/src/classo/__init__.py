"""Constrained Lasso ``min 1/2||Ax - b||^2 + lam ||x||_1  s.t.  Bx = d``.

The main solver is :func:`alm_solve`, an inexact augmented Lagrangian method
on the dual whose subproblems are solved by a semismooth Newton method.
First-order baselines live in :mod:`classo.baselines`.
"""

from .alm import IterationTrace, SolveResult, SolveStatus, SsnalConfig, alm_solve
from .baselines import BaselineConfig, aadmm_solve, admm_solve, lalm_solve, primal_dual_solve
from .problem import (
    DegenerateInstanceError,
    DimensionError,
    PrimalDualPoint,
    ProblemData,
    Residuals,
    lambda_from_fraction,
    objective_dual,
    objective_primal,
    residuals,
)
from .ssn import SsnConfig, Strategy

__all__ = [
    "BaselineConfig",
    "DegenerateInstanceError",
    "DimensionError",
    "IterationTrace",
    "PrimalDualPoint",
    "ProblemData",
    "Residuals",
    "SolveResult",
    "SolveStatus",
    "SsnConfig",
    "SsnalConfig",
    "Strategy",
    "aadmm_solve",
    "admm_solve",
    "alm_solve",
    "lalm_solve",
    "lambda_from_fraction",
    "objective_dual",
    "objective_primal",
    "primal_dual_solve",
    "residuals",
]
