"""First-order comparison solvers: ADMM, accelerated ADMM, linearized ALM
and the Chambolle-Pock primal-dual method.

Every solver stops once both its primal and dual residuals fall below
``config.eps`` or after ``config.max_iter`` iterations, and reports a
:class:`~classo.alm.SolveResult` whose point carries dual estimates
``u = Ax - b`` and the method's multiplier for ``Bx = d``.
"""

from __future__ import annotations

import dataclasses
import math
import time
from typing import List, Optional

import numpy as np
import scipy.linalg

from .alm import IterationTrace, SolveResult, SolveStatus
from .problem import (
    PrimalDualPoint,
    ProblemData,
    nnz,
    objective_dual,
    objective_primal,
    primal_infeasibility,
)
from .prox import proj_linf, prox_l1

_norm = np.linalg.norm

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
RESTART_FACTOR = 1.0  # A-ADMM restarts when the combined residual grows
POWER_SAFETY = 1.01


@dataclasses.dataclass(frozen=True)
class BaselineConfig:
    eps: float = 1e-6
    max_iter: int = 10_000
    rho: float = 1.0
    step_scale: float = 1.618
    power_iters: int = 200
    trace_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if not 0 < self.step_scale <= GOLDEN + 1e-12:
            raise ValueError("step_scale must lie in (0, (1+sqrt(5))/2]")


def power_iteration(M, iters: int = 200, seed: int = 0, rtol: float = 1e-10) -> float:
    """Largest eigenvalue of ``M^T M`` (the squared spectral norm of ``M``).

    Iterates on the smaller of the two Gram matrices. The Rayleigh quotient
    is a lower bound; callers inflate it by :data:`POWER_SAFETY`.
    """
    M = np.asarray(M, dtype=float)
    rng = np.random.default_rng(seed)
    if M.shape[0] <= M.shape[1]:
        def gram(v):
            return M @ (M.T @ v)
        v = rng.standard_normal(M.shape[0])
    else:
        def gram(v):
            return M.T @ (M @ v)
        v = rng.standard_normal(M.shape[1])
    v /= _norm(v)
    est = 0.0
    for _ in range(iters):
        g = gram(v)
        new = float(v @ g)
        gn = _norm(g)
        if gn == 0.0:
            return 0.0
        v = g / gn
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est


class _Recorder:
    def __init__(self, data: ProblemData, config: BaselineConfig, param: float):
        self.data = data
        self.every = config.trace_every
        self.param = param
        self.traces: List[IterationTrace] = []
        self.t0 = time.perf_counter()

    def record(self, k, x, u, v, eta_p, eta_d, force=False):
        if not force and (k % self.every):
            return
        if self.traces and self.traces[-1].k == k:
            return
        obj_p = objective_primal(self.data, x)
        obj_d = objective_dual(self.data, u, v)
        gap = (obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
        self.traces.append(
            IterationTrace(k, self.param, eta_p, eta_d, gap, obj_p, obj_d, 0,
                           time.perf_counter() - self.t0)
        )

    def result(self, data, x, v, k, converged, eta_d) -> SolveResult:
        u = data.A @ x - data.b
        w = proj_linf(data.B.T @ v - data.A.T @ u, data.lam)
        return SolveResult(
            point=PrimalDualPoint(x, u, v, w),
            status=SolveStatus.CONVERGED if converged else SolveStatus.MAX_OUTER,
            traces=self.traces,
            nnz=nnz(x),
            total_inner=0,
            iterations=k,
            elapsed=time.perf_counter() - self.t0,
            eta_p=primal_infeasibility(data, x),
            eta_d=eta_d,
        )


def _start(data: ProblemData, start: Optional[PrimalDualPoint]):
    if start is None:
        return np.zeros(data.n), np.zeros(data.s), np.zeros(data.n)
    return start.x.astype(float).copy(), start.v.astype(float).copy(), start.w.astype(float).copy()


class _AdmmXSolver:
    """Solves ``(A^T A + rho (B^T B + I)) x = rhs`` via an (m+s)-sized factorization."""

    def __init__(self, data: ProblemData, rho: float):
        self.rho = rho
        self.C = np.vstack([data.A, math.sqrt(rho) * data.B])
        K = self.C @ self.C.T
        K[np.diag_indices_from(K)] += rho
        jitter = 0.0
        while True:
            try:
                self.fac = scipy.linalg.cho_factor(K, lower=True, check_finite=False)
                break
            except np.linalg.LinAlgError:
                jitter = max(jitter * 10, 1e-12 * (1 + np.trace(K) / K.shape[0]))
                K[np.diag_indices_from(K)] += jitter

    def __call__(self, rhs):
        C = self.C
        return (rhs - C.T @ scipy.linalg.cho_solve(self.fac, C @ rhs, check_finite=False)) / self.rho


def admm_solve(
    data: ProblemData,
    config: Optional[BaselineConfig] = None,
    start: Optional[PrimalDualPoint] = None,
) -> SolveResult:
    """Two-block ADMM on ``x = z`` with ``Bx = d`` kept in the smooth block.

    ``start.v`` and ``start.w`` seed the multipliers as ``mu_B = -v`` and
    ``mu_z = w``.
    """
    return _admm(data, config or BaselineConfig(), start, accelerate=False, restart=False)


def aadmm_solve(
    data: ProblemData,
    config: Optional[BaselineConfig] = None,
    start: Optional[PrimalDualPoint] = None,
    accelerate: bool = True,
    restart: bool = True,
) -> SolveResult:
    """ADMM with Nesterov extrapolation of ``(z, multipliers)`` and adaptive restart.

    With ``accelerate=False`` the extrapolation weight stays at one and the
    iterates coincide with :func:`admm_solve`.
    """
    return _admm(data, config or BaselineConfig(), start, accelerate=accelerate, restart=restart)


def _admm(data, config, start, accelerate, restart) -> SolveResult:
    rho = config.rho
    gamma = config.step_scale
    solve_x = _AdmmXSolver(data, rho)
    A, B, b, d, lam = data.A, data.B, data.b, data.d, data.lam
    Atb = A.T @ b
    dnorm1 = 1.0 + float(_norm(d))

    x, v0, w0 = _start(data, start)
    z = x.copy()
    mu_b = -v0
    mu_z = w0
    z_hat, mu_b_hat, mu_z_hat = z, mu_b, mu_z
    alpha = 1.0
    c_prev = math.inf
    rec = _Recorder(data, config, rho)
    converged = False
    eta_d = math.inf

    k = 0
    while k < config.max_iter:
        rhs = Atb + B.T @ (rho * d - mu_b_hat) + rho * z_hat - mu_z_hat
        x = solve_x(rhs)
        z_prev = z
        z = prox_l1(x + mu_z_hat / rho, lam / rho)
        bx = B @ x - d
        mu_b_prev, mu_z_prev = mu_b, mu_z
        mu_b = mu_b_hat + gamma * rho * bx
        mu_z = mu_z_hat + gamma * rho * (x - z)
        k += 1

        eta_p = float(_norm(bx)) / dnorm1
        coupling = float(_norm(x - z))
        eta_d = rho * float(_norm(z - z_prev))
        rec.record(k, x, A @ x - b, -mu_b, max(eta_p, coupling), eta_d)
        if max(eta_p, coupling, eta_d) < config.eps:
            converged = True
            break

        if accelerate:
            c = (float(_norm(mu_b - mu_b_hat)) ** 2 + float(_norm(mu_z - mu_z_hat)) ** 2) / rho \
                + rho * float(_norm(z - z_hat)) ** 2
            if restart and c > RESTART_FACTOR * c_prev:
                alpha = 1.0
                z_hat, mu_b_hat, mu_z_hat = z, mu_b, mu_z
            else:
                alpha_next = (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
                beta = (alpha - 1.0) / alpha_next
                z_hat = z + beta * (z - z_prev)
                mu_b_hat = mu_b + beta * (mu_b - mu_b_prev)
                mu_z_hat = mu_z + beta * (mu_z - mu_z_prev)
                alpha = alpha_next
            c_prev = c
        else:
            z_hat, mu_b_hat, mu_z_hat = z, mu_b, mu_z

    u = A @ x - b
    rec.record(k, x, u, -mu_b, primal_infeasibility(data, x), eta_d, force=True)
    return rec.result(data, x, -mu_b, k, converged, eta_d)


def lalm_solve(
    data: ProblemData,
    config: Optional[BaselineConfig] = None,
    start: Optional[PrimalDualPoint] = None,
) -> SolveResult:
    """Linearized ALM: one proximal-gradient step on the augmented Lagrangian per
    multiplier update, with step ``1/eta`` and ``eta >= ||A^T A + rho B^T B||``."""
    config = config or BaselineConfig()
    rho, gamma = config.rho, config.step_scale
    A, B, b, d, lam = data.A, data.B, data.b, data.d, data.lam
    eta = lalm_step_bound(data, config)
    dnorm1 = 1.0 + float(_norm(d))
    x, v, _ = _start(data, start)
    rec = _Recorder(data, config, eta)
    converged = False
    eta_d = math.inf
    ax = A @ x
    bx = B @ x - d
    k = 0
    while k < config.max_iter:
        grad = A.T @ (ax - b) + B.T @ (rho * bx - v)
        x_new = prox_l1(x - grad / eta, lam / eta)
        ax = A @ x_new
        bx = B @ x_new - d
        v = v - gamma * rho * bx
        eta_d = eta * float(_norm(x_new - x))
        x = x_new
        k += 1
        eta_p = float(_norm(bx)) / dnorm1
        rec.record(k, x, ax - b, v, eta_p, eta_d)
        if max(eta_p, eta_d) < config.eps:
            converged = True
            break
    rec.record(k, x, ax - b, v, primal_infeasibility(data, x), eta_d, force=True)
    return rec.result(data, x, v, k, converged, eta_d)


def lalm_step_bound(data: ProblemData, config: BaselineConfig) -> float:
    """``POWER_SAFETY`` times the power-iteration estimate of ``||A^T A + rho B^T B||``."""
    M = np.vstack([data.A, math.sqrt(config.rho) * data.B])
    return POWER_SAFETY * power_iteration(M, config.power_iters, config.seed)


def primal_dual_steps(data: ProblemData, config: BaselineConfig):
    """Step sizes ``(tau_p, tau_d, L)`` with ``tau_p * tau_d * L**2 == 1`` and
    ``L`` an over-estimate of ``||[A; B]||``."""
    K = np.vstack([data.A, data.B])
    L = math.sqrt(POWER_SAFETY * power_iteration(K, config.power_iters, config.seed))
    return 1.0 / L, 1.0 / L, L


def primal_dual_solve(
    data: ProblemData,
    config: Optional[BaselineConfig] = None,
    start: Optional[PrimalDualPoint] = None,
) -> SolveResult:
    """Chambolle-Pock on ``lam ||x||_1 + F([A; B] x)`` with
    ``F(p, q) = 1/2 ||p - b||^2 + indicator(q = d)``."""
    config = config or BaselineConfig()
    A, B, b, d, lam = data.A, data.B, data.b, data.d, data.lam
    tau_p, tau_d, L = primal_dual_steps(data, config)
    dnorm1 = 1.0 + float(_norm(d))
    x, v_dual, _ = _start(data, start)
    # This method's multiplier for Bx = d has the opposite sign convention.
    q = -v_dual
    u = A @ x - b if start is not None else np.zeros(data.m)
    x_bar = x.copy()
    rec = _Recorder(data, config, tau_p)
    converged = False
    eta_d = math.inf
    k = 0
    while k < config.max_iter:
        u_new = (u + tau_d * (A @ x_bar - b)) / (1.0 + tau_d)
        q_new = q + tau_d * (B @ x_bar - d)
        x_new = prox_l1(x - tau_p * (A.T @ u_new + B.T @ q_new), tau_p * lam)
        dx = x - x_new
        du, dq = u - u_new, q - q_new
        primal_res = dx / tau_p - (A.T @ du + B.T @ dq)
        dual_res = np.concatenate([du / tau_d - A @ dx, dq / tau_d - B @ dx])
        x_bar = 2.0 * x_new - x
        x, u, q = x_new, u_new, q_new
        k += 1
        eta_p = max(float(_norm(B @ x - d)) / dnorm1, float(_norm(primal_res)))
        eta_d = float(_norm(dual_res))
        rec.record(k, x, u, -q, eta_p, eta_d)
        if max(eta_p, eta_d) < config.eps:
            converged = True
            break
    rec.record(k, x, A @ x - b, -q, primal_infeasibility(data, x), eta_d, force=True)
    res = rec.result(data, x, -q, k, converged, eta_d)
    return res
