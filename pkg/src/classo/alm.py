"""Inexact augmented Lagrangian method on the dual, with semismooth Newton
subproblem solves (SSNAL)."""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from typing import Callable, List, Optional

import numpy as np

from .problem import (
    PrimalDualPoint,
    ProblemData,
    nnz,
    objective_dual,
    objective_primal,
    residuals,
)
from .ssn import SsnConfig, ssn_solve

logger = logging.getLogger(__name__)

_norm = np.linalg.norm


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_OUTER = "max_outer"
    INNER_FAILURE = "inner_failure"


def inverse_square(k: int) -> float:
    return 1.0 / (k + 1) ** 2


@dataclasses.dataclass(frozen=True)
class SsnalConfig:
    """Outer-loop parameters.

    ``eps_seq`` and ``zeta_seq`` map the outer index ``k`` to the summable
    coefficients of the two inexactness rules for the subproblem.
    """

    eps: float = 1e-6
    max_outer: int = 100
    sigma0: float = 1.0
    sigma_growth: float = 3.0
    sigma_max: float = 1e6
    eps_seq: Callable[[int], float] = inverse_square
    zeta_seq: Callable[[int], float] = inverse_square
    ssn: SsnConfig = dataclasses.field(default_factory=SsnConfig)
    inner_tol_floor: float = 1e-13

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not self.sigma0 > 0 or not self.sigma_max > 0:
            raise ValueError("sigma0 and sigma_max must be positive")
        if not self.sigma_growth >= 1:
            raise ValueError("sigma_growth must be >= 1")


@dataclasses.dataclass
class IterationTrace:
    k: int
    sigma: float
    eta_p: float
    eta_d: float
    eta_relgap: float
    obj_p: float
    obj_d: float
    inner_iters: int
    elapsed: float


@dataclasses.dataclass
class SolveResult:
    point: PrimalDualPoint
    status: SolveStatus
    traces: List[IterationTrace]
    nnz: int
    total_inner: int
    iterations: int = 0
    elapsed: float = 0.0
    eta_p: float = math.nan
    eta_d: float = math.nan

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


def sigma_schedule(k: int, config: SsnalConfig) -> float:
    """``min(sigma0 * sigma_growth**k, sigma_max)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    try:
        grown = config.sigma0 * config.sigma_growth**k
    except OverflowError:
        grown = math.inf
    return min(grown, config.sigma_max)


def _inner_stop(k: int, x: np.ndarray, sigma: float, config: SsnalConfig):
    eps_k = config.eps_seq(k)
    zeta_k = config.zeta_seq(k)
    denom = max(1.0, math.sqrt(sigma))
    floor = config.inner_tol_floor

    def stop(gnorm, x_trial):
        if k == 0:
            tol = eps_k / denom
        else:
            tol = min(eps_k, zeta_k * float(_norm(x_trial - x))) / denom
        return gnorm <= max(tol, floor)

    return stop


def alm_solve(
    data: ProblemData,
    config: Optional[SsnalConfig] = None,
    start: Optional[PrimalDualPoint] = None,
    callback: Optional[Callable[[IterationTrace, PrimalDualPoint], None]] = None,
) -> SolveResult:
    """Solve the constrained Lasso by the inexact ALM on its dual.

    Each outer step minimizes the augmented Lagrangian in ``(u, v, w)`` with
    the semismooth Newton method (warm-started from the previous ``(u, v)``),
    then updates ``x <- x - sigma (A^T u - B^T v + w)``. Iteration stops once
    ``max(eta_p, eta_d) < config.eps``.
    """
    config = config or SsnalConfig()
    pt = PrimalDualPoint.zeros(data) if start is None else start.copy()
    traces: List[IterationTrace] = []
    total_inner = 0
    failures = 0
    sigma_offset = 0
    status = SolveStatus.MAX_OUTER
    t0 = time.perf_counter()

    res = residuals(data, pt)
    if res.eta_classo < config.eps and start is not None:
        status = SolveStatus.CONVERGED
        k = 0
    else:
        for k in range(config.max_outer):
            sigma = sigma_schedule(k + sigma_offset, config)
            stop = _inner_stop(k, pt.x, sigma, config)
            inner = ssn_solve(
                pt.x, sigma, data, config.ssn, np.concatenate([pt.u, pt.v]), stop=stop
            )
            total_inner += inner.inner_iters
            u, v, w = inner.u, inner.v, inner.w
            dual_res = data.A.T @ u - data.B.T @ v + w
            x_new = pt.x - sigma * dual_res
            pt = PrimalDualPoint(x_new, u, v, w)

            res = residuals(data, pt)
            obj_p = objective_primal(data, x_new)
            obj_d = objective_dual(data, u, v)
            trace = IterationTrace(
                k=k,
                sigma=sigma,
                eta_p=res.eta_p,
                eta_d=res.eta_d,
                eta_relgap=res.eta_relgap,
                obj_p=obj_p,
                obj_d=obj_d,
                inner_iters=inner.inner_iters,
                elapsed=time.perf_counter() - t0,
            )
            traces.append(trace)
            if callback is not None:
                callback(trace, pt)
            logger.debug(
                "k=%d sigma=%.1e eta_p=%.2e eta_d=%.2e gap=%.2e inner=%d",
                k, sigma, res.eta_p, res.eta_d, res.eta_relgap, inner.inner_iters,
            )
            if res.eta_classo < config.eps:
                status = SolveStatus.CONVERGED
                break
            if inner.converged or inner.stagnated:
                failures = 0
            else:
                failures += 1
                if failures >= 2:
                    status = SolveStatus.INNER_FAILURE
                    logger.warning("inner solver failed twice in a row: %s", inner.message)
                    break
                sigma_offset += 1

    elapsed = time.perf_counter() - t0
    return SolveResult(
        point=pt,
        status=status,
        traces=traces,
        nnz=nnz(pt.x),
        total_inner=total_inner,
        iterations=len(traces),
        elapsed=elapsed,
        eta_p=res.eta_p,
        eta_d=res.eta_d,
    )
