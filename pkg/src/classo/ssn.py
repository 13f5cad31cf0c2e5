"""Semismooth Newton solver for the augmented Lagrangian subproblem.

For a fixed multiplier ``x`` and penalty ``sigma`` the subproblem in
``y = (u, v)`` is the minimization of

    theta(u, v) = 1/2 ||u||^2 + <b, u> - <d, v>
                  + 1/(2 sigma) ||prox(x - sigma (A^T u - B^T v))||^2
                  - 1/(2 sigma) ||x||^2,

where ``prox`` is soft-thresholding at ``sigma * lam``. ``theta`` is
continuously differentiable and its generalized Hessian is
``diag(I_m, 0) + sigma * Abar_J Abar_J^T`` with ``Abar = [A; -B]`` restricted
to the active columns ``J``. Because ``|J|`` is typically much smaller than
``n`` the Newton systems are cheap to form.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
from typing import Callable, List, Optional

import numpy as np
import scipy.linalg

from .problem import DimensionError, ProblemData
from .prox import ActiveSet, clarke_diag, proj_linf

logger = logging.getLogger(__name__)

_norm = np.linalg.norm

MAX_BACKTRACKS = 50
STAGNATION_WINDOW = 3
STAGNATION_FACTOR = 0.5


class Strategy(enum.Enum):
    """How the regularized Newton system is solved."""

    AUTO = "auto"
    CHOLESKY = "cholesky"
    SMW = "smw"
    CG = "cg"
    CG_FALLBACK = "cg_fallback"


class LineSearchError(RuntimeError):
    """Backtracking did not find an Armijo step within ``MAX_BACKTRACKS``."""


@dataclasses.dataclass(frozen=True)
class SsnConfig:
    """Tunables of the semismooth Newton method.

    Attributes:
      mu: Armijo slope, in (0, 1/2).
      eta_bar: cap on the Newton-system residual, in (0, 1).
      tau: superlinear exponent of the residual requirement, in (0, 1].
      tau1, tau2: regularization ``eps_j = tau1 * min(tau2, ||grad||)``.
      delta: backtracking ratio.
      max_inner: maximum number of Newton steps.
      grad_tol: default stopping threshold on ``||grad theta||``.
      max_cg: iteration cap for conjugate gradients.
      strategy: linear-system strategy, ``AUTO`` picks per iteration.
      cg_threshold: above this ``m + s`` the automatic choice uses CG
        instead of a dense Cholesky factorization.
      eps_floor: lower bound on ``eps_j``.
    """

    mu: float = 0.1
    eta_bar: float = 0.1
    tau: float = 0.5
    tau1: float = 0.1
    tau2: float = 0.1
    delta: float = 0.5
    max_inner: int = 200
    grad_tol: float = 1e-6
    max_cg: int = 500
    strategy: Strategy = Strategy.AUTO
    cg_threshold: int = 10_000
    eps_floor: float = 1e-12

    def __post_init__(self):
        if not 0 < self.mu < 0.5:
            raise ValueError("mu must lie in (0, 1/2)")
        if not 0 < self.eta_bar < 1:
            raise ValueError("eta_bar must lie in (0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        for name in ("tau1", "tau2", "delta"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_inner < 1 or self.max_cg < 1:
            raise ValueError("iteration caps must be at least 1")
        if not self.grad_tol > 0 or not self.eps_floor > 0:
            raise ValueError("tolerances must be positive")
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclasses.dataclass
class SsnResult:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    inner_iters: int
    final_grad_norm: float
    strategy_used_per_iter: List[Strategy]
    converged: bool
    grad_norms: List[float] = dataclasses.field(default_factory=list)
    theta_values: List[float] = dataclasses.field(default_factory=list)
    step_sizes: List[float] = dataclasses.field(default_factory=list)
    cg_iters: int = 0
    stagnated: bool = False
    message: str = ""


@dataclasses.dataclass
class _State:
    u: np.ndarray
    v: np.ndarray
    atv: np.ndarray  # A^T u - B^T v
    z: np.ndarray  # x - sigma * atv
    p: np.ndarray  # soft-threshold of z
    grad: np.ndarray
    theta: float


class _Subproblem:
    """Evaluation of ``theta`` and its derivatives for fixed ``(x, sigma)``."""

    def __init__(self, x, sigma: float, data: ProblemData):
        x = np.asarray(x, dtype=float)
        if x.shape != (data.n,):
            raise DimensionError(f"x must have length {data.n}, got shape {x.shape}")
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.x = x
        self.sigma = float(sigma)
        self.data = data
        self.t = self.sigma * data.lam
        self.xx = float(x @ x)

    def split(self, y):
        y = np.asarray(y, dtype=float)
        m, s = self.data.m, self.data.s
        if y.shape != (m + s,):
            raise DimensionError(f"y must have length {m + s}, got shape {y.shape}")
        return y[:m], y[m:]

    def state(self, u, v) -> _State:
        data = self.data
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != (data.m,) or v.shape != (data.s,):
            raise DimensionError("u and v must have lengths m and s")
        atv = data.A.T @ u - data.B.T @ v
        return self._state_from(u, v, atv)

    def _state_from(self, u, v, atv) -> _State:
        data = self.data
        z = self.x - self.sigma * atv
        p = np.sign(z) * np.maximum(np.abs(z) - self.t, 0.0)
        grad = np.concatenate([u + data.b - data.A @ p, data.B @ p - data.d])
        theta = (
            0.5 * float(u @ u)
            + float(data.b @ u)
            - float(data.d @ v)
            + (float(p @ p) - self.xx) / (2.0 * self.sigma)
        )
        return _State(u, v, atv, z, p, grad, theta)

    def theta_change(self, st: _State, du, dv, datv, alpha: float):
        """Trial point and ``theta(trial) - theta(current)`` without cancellation."""
        t = self.t
        u_new = st.u + alpha * du
        v_new = st.v + alpha * dv
        atv_new = st.atv + alpha * datv
        shift = -self.sigma * alpha * datv
        z_new = self.x - self.sigma * atv_new
        p_new = np.sign(z_new) * np.maximum(np.abs(z_new) - t, 0.0)
        # Where both points share a branch of the soft-threshold the change in
        # p is exactly the change in z (or zero).
        same_pos = (st.z > t) & (z_new > t)
        same_neg = (st.z < -t) & (z_new < -t)
        same_zero = (np.abs(st.z) <= t) & (np.abs(z_new) <= t)
        dp = np.where(same_pos | same_neg, shift, p_new - st.p)
        dp[same_zero] = 0.0
        adu = alpha * du
        change = (
            0.5 * float(adu @ (2.0 * st.u + adu))
            + float(self.data.b @ adu)
            - alpha * float(self.data.d @ dv)
            + float(dp @ (2.0 * st.p + dp)) / (2.0 * self.sigma)
        )
        return u_new, v_new, atv_new, change

    def backtrack(self, st: _State, du, dv, mu: float, delta: float):
        """Armijo backtracking; returns ``(alpha, steps, new_state)``."""
        data = self.data
        datv = data.A.T @ du - data.B.T @ dv
        slope = float(st.grad @ np.concatenate([du, dv]))
        if not slope < 0:
            raise LineSearchError(f"not a descent direction (slope {slope:.3e})")
        alpha = 1.0
        for steps in range(MAX_BACKTRACKS + 1):
            u_new, v_new, atv_new, change = self.theta_change(st, du, dv, datv, alpha)
            if change <= mu * alpha * slope:
                # Fresh product; the running update drifts once sigma is large.
                atv_new = data.A.T @ u_new - data.B.T @ v_new
                return alpha, steps, self._state_from(u_new, v_new, atv_new)
            alpha *= delta
        raise LineSearchError(f"no Armijo step after {MAX_BACKTRACKS} backtracks")


def _as_state(u, v, x, sigma, data):
    sub = _Subproblem(x, sigma, data)
    return sub, sub.state(u, v)


def theta_value(u, v, x, sigma: float, data: ProblemData) -> float:
    """Value of the subproblem objective at ``(u, v)``."""
    return _as_state(u, v, x, sigma, data)[1].theta


def theta_grad(u, v, x, sigma: float, data: ProblemData) -> np.ndarray:
    """Stacked gradient ``[u + b - A p; B p - d]`` with ``p`` the soft-threshold."""
    return _as_state(u, v, x, sigma, data)[1].grad


def _cg(apply, rhs, tol: float, maxiter: int, x0=None):
    """Plain conjugate gradients on an SPD operator; stops on ``||r|| <= tol``."""
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - apply(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    it = 0
    while it < maxiter and np.sqrt(rr) > tol:
        q = apply(p)
        curv = float(p @ q)
        if curv <= 0:
            raise np.linalg.LinAlgError("non-positive curvature in CG")
        a = rr / curv
        x += a * p
        r -= a * q
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return x, it


def choose_strategy(r: int, m: int, s: int, config: SsnConfig) -> Strategy:
    if config.strategy is not Strategy.AUTO:
        return config.strategy
    if r <= 0.5 * (m + s):
        return Strategy.SMW
    if m + s <= config.cg_threshold:
        return Strategy.CHOLESKY
    return Strategy.CG


def newton_direction(
    u,
    v,
    grad,
    active: ActiveSet,
    eps_j: float,
    sigma: float,
    data: ProblemData,
    config: SsnConfig,
    cg_tol: Optional[float] = None,
):
    """Approximate solution of ``(V + eps_j diag(0, I_s)) d = -grad``.

    The system is rescaled by ``L = diag(I_m, sqrt(eps_j) I_s)`` into
    ``(I + sigma Ahat_J Ahat_J^T) L d = -L^{-1} grad`` with
    ``Ahat_J = [A_J; -B_J / sqrt(eps_j)]``, which is solved by a Cholesky
    factorization, the Sherman-Morrison-Woodbury identity (small ``r``), or
    conjugate gradients.

    Returns ``(direction, strategy_used, cg_iters)``.
    """
    if not eps_j > 0:
        raise ValueError("eps_j must be positive")
    m, s = data.m, data.s
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (m + s,):
        raise DimensionError(f"grad must have length {m + s}")
    idx = active.indices
    r = active.r
    gnorm = float(_norm(grad))
    tol = min(config.eta_bar, gnorm ** (1.0 + config.tau)) if cg_tol is None else cg_tol
    strategy = choose_strategy(r, m, s, config)

    AJ = data.A[:, idx]
    BJ = data.B[:, idx]
    root = np.sqrt(eps_j)

    def apply_full(d):
        # (H_eps + sigma Abar_J Abar_J^T) d
        t = AJ.T @ d[:m] - BJ.T @ d[m:]
        return np.concatenate([d[:m] + sigma * (AJ @ t), eps_j * d[m:] - sigma * (BJ @ t)])

    if r == 0:
        return np.concatenate([-grad[:m], -grad[m:] / eps_j]), strategy, 0

    if strategy is Strategy.CG:
        d, it = _cg(apply_full, -grad, tol, config.max_cg)
        return d, strategy, it

    Ahat = np.vstack([AJ, BJ * (-1.0 / root)])
    scale = np.concatenate([np.ones(m), np.full(s, root)])  # diagonal of L

    try:
        if strategy is Strategy.SMW:
            small = Ahat.T @ Ahat
            small[np.diag_indices_from(small)] += 1.0 / sigma
            fac = scipy.linalg.cho_factor(small, lower=True, check_finite=False)

            def solve_hat(rhs):
                return rhs - Ahat @ scipy.linalg.cho_solve(fac, Ahat.T @ rhs, check_finite=False)

        else:
            big = sigma * (Ahat @ Ahat.T)
            big[np.diag_indices_from(big)] += 1.0
            fac = scipy.linalg.cho_factor(big, lower=True, check_finite=False)

            def solve_hat(rhs):
                return scipy.linalg.cho_solve(fac, rhs, check_finite=False)

    except np.linalg.LinAlgError:
        logger.debug("Cholesky failed (r=%d); falling back to jittered CG", r)
        jitter = config.eps_floor

        def apply_jittered(d):
            return apply_full(d) + jitter * d

        d, it = _cg(apply_jittered, -grad, tol, config.max_cg)
        return d, Strategy.CG_FALLBACK, it

    d = solve_hat(-grad / scale) / scale
    # A couple of refinement sweeps with the same factorization recover the
    # accuracy lost to the 1/sqrt(eps) scaling when eps_j is tiny.
    for _ in range(2):
        res = apply_full(d) + grad
        if _norm(res) <= tol:
            break
        d -= solve_hat(res / scale) / scale
    return d, strategy, 0


def line_search(u, v, direction, x, sigma: float, data: ProblemData, config: SsnConfig):
    """Armijo backtracking along ``direction``; returns ``(alpha, steps)``."""
    sub, st = _as_state(u, v, x, sigma, data)
    du, dv = sub.split(direction)
    alpha, steps, _ = sub.backtrack(st, du, dv, config.mu, config.delta)
    return alpha, steps


def ssn_solve(
    x,
    sigma: float,
    data: ProblemData,
    config: SsnConfig,
    y_start=None,
    stop: Optional[Callable[[float, np.ndarray], bool]] = None,
) -> SsnResult:
    """Minimize ``theta`` over ``y = (u, v)`` by a globalized semismooth Newton method.

    Args:
      x: current multiplier (primal estimate).
      sigma: penalty parameter.
      data: problem instance.
      config: method parameters.
      y_start: warm start of length ``m + s``; zeros if omitted.
      stop: optional predicate ``stop(grad_norm, x_trial)``; ``x_trial`` is
        the soft-thresholded point that would become the next multiplier.
        Defaults to ``grad_norm <= config.grad_tol``.

    Returns:
      An :class:`SsnResult`; ``w`` is the box projection of ``x/sigma - Abar^T y``.
    """
    sub = _Subproblem(x, sigma, data)
    y0 = np.zeros(data.m + data.s) if y_start is None else np.asarray(y_start, dtype=float)
    u0, v0 = sub.split(y0)
    st = sub.state(u0.copy(), v0.copy())
    if stop is None:
        def stop(gn, _p, _tol=config.grad_tol):
            return gn <= _tol

    strategies: List[Strategy] = []
    grad_norms: List[float] = []
    thetas: List[float] = []
    steps_taken: List[float] = []
    total_cg = 0
    converged = False
    stagnated = False
    message = ""
    m = data.m
    j = 0
    best = np.inf
    since_best = 0
    noise_gate = np.sqrt(np.finfo(float).eps) * (1.0 + float(_norm(data.b)))
    while True:
        gnorm = float(_norm(st.grad))
        grad_norms.append(gnorm)
        thetas.append(st.theta)
        if stop(gnorm, st.p):
            converged = True
            break
        if j >= config.max_inner:
            message = "max_inner reached"
            break
        # Rounding in x - sigma * Abar^T y puts a floor under ||grad||; stop
        # once full Newton steps no longer make progress against it.
        local = bool(steps_taken) and steps_taken[-1] == 1.0 and gnorm <= noise_gate
        if gnorm < STAGNATION_FACTOR * best or not local:
            best = min(best, gnorm)
            since_best = 0
        else:
            since_best += 1
            if since_best >= STAGNATION_WINDOW:
                stagnated = True
                message = f"stagnated at ||grad|| = {gnorm:.3e}"
                break
        eps_j = max(config.tau1 * min(config.tau2, gnorm), config.eps_floor)
        active = clarke_diag(st.z, sub.t)
        d, used, cg_it = newton_direction(st.u, st.v, st.grad, active, eps_j, sigma, data, config)
        total_cg += cg_it
        strategies.append(used)
        try:
            alpha, _, st = sub.backtrack(st, d[:m], d[m:], config.mu, config.delta)
        except LineSearchError as exc:
            message = f"line search failed: {exc}"
            logger.debug("SSN stopped at j=%d: %s", j, message)
            break
        steps_taken.append(alpha)
        j += 1

    w = proj_linf(st.z / sigma, data.lam)
    return SsnResult(
        u=st.u,
        v=st.v,
        w=w,
        inner_iters=j,
        final_grad_norm=grad_norms[-1],
        strategy_used_per_iter=strategies,
        converged=converged,
        grad_norms=grad_norms,
        theta_values=thetas,
        step_sizes=steps_taken,
        cg_iters=total_cg,
        stagnated=stagnated,
        message=message,
    )
