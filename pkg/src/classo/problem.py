"""Constrained Lasso instances, objectives and KKT residuals.

The problem is

    min_x  1/2 ||A x - b||^2 + lam ||x||_1   subject to  B x = d,

and its dual is taken over (u, v, w) with A^T u - B^T v + w = 0.
"""

from __future__ import annotations

import dataclasses

import numpy as np

_norm = np.linalg.norm


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent with a problem instance."""


class DegenerateInstanceError(ValueError):
    """Raised when an instance cannot produce a meaningful penalty weight."""


@dataclasses.dataclass(frozen=True, eq=False)
class ProblemData:
    """One constrained Lasso instance ``(A, b, B, d, lam)``.

    Matrices are stored dense in Fortran (column-major) order and marked
    read-only, so an instance can be shared freely between threads.
    """

    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    d: np.ndarray
    lam: float

    def __post_init__(self):
        A = np.asfortranarray(np.atleast_2d(np.asarray(self.A, dtype=float)))
        B = np.asfortranarray(np.atleast_2d(np.asarray(self.B, dtype=float)))
        b = np.ascontiguousarray(np.ravel(np.asarray(self.b, dtype=float)))
        d = np.ascontiguousarray(np.ravel(np.asarray(self.d, dtype=float)))
        m, n = A.shape
        s = B.shape[0]
        if m < 1 or n < 1:
            raise DimensionError(f"A must be non-empty, got shape {A.shape}")
        if s < 1:
            raise DimensionError("B must have at least one row; plain Lasso is not supported")
        if B.shape[1] != n:
            raise DimensionError(f"A has {n} columns but B has {B.shape[1]}")
        if b.shape[0] != m:
            raise DimensionError(f"len(b)={b.shape[0]} does not match m={m}")
        if d.shape[0] != s:
            raise DimensionError(f"len(d)={d.shape[0]} does not match s={s}")
        lam = float(self.lam)
        if not lam > 0:
            raise ValueError(f"lam must be positive, got {lam}")
        for arr in (A, B, b, d):
            arr.flags.writeable = False
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "lam", lam)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def s(self) -> int:
        return self.B.shape[0]

    def with_lambda(self, lam: float) -> "ProblemData":
        return ProblemData(self.A, self.b, self.B, self.d, lam)


@dataclasses.dataclass
class PrimalDualPoint:
    """Iterate ``(x, u, v, w)``: primal estimate plus the three dual blocks."""

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def zeros(cls, data: ProblemData) -> "PrimalDualPoint":
        return cls(np.zeros(data.n), np.zeros(data.m), np.zeros(data.s), np.zeros(data.n))

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(self.x.copy(), self.u.copy(), self.v.copy(), self.w.copy())


@dataclasses.dataclass(frozen=True)
class Residuals:
    eta_p: float
    eta_d: float
    eta_relgap: float
    eta_classo: float


def _check_len(name, vec, expected):
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.shape[0] != expected:
        raise DimensionError(f"{name} must have length {expected}, got shape {vec.shape}")
    return vec


def objective_primal(data: ProblemData, x) -> float:
    """Return ``1/2 ||Ax - b||^2 + lam ||x||_1``."""
    x = _check_len("x", x, data.n)
    r = data.A @ x - data.b
    return 0.5 * float(r @ r) + data.lam * float(np.abs(x).sum())


def objective_dual(data: ProblemData, u, v) -> float:
    """Return ``-(1/2 ||u||^2 + <b, u> - <d, v>)``."""
    u = _check_len("u", u, data.m)
    v = _check_len("v", v, data.s)
    return -(0.5 * float(u @ u) + float(data.b @ u) - float(data.d @ v))


def primal_infeasibility(data: ProblemData, x) -> float:
    x = _check_len("x", x, data.n)
    return float(_norm(data.B @ x - data.d)) / (1.0 + float(_norm(data.d)))


def dual_infeasibility(data: ProblemData, u, v, w) -> float:
    u = _check_len("u", u, data.m)
    v = _check_len("v", v, data.s)
    w = _check_len("w", w, data.n)
    return float(_norm(data.A.T @ u - data.B.T @ v + w))


def residuals(data: ProblemData, pt: PrimalDualPoint) -> Residuals:
    """KKT-based accuracy measures of a primal-dual point.

    ``eta_p`` is relative primal feasibility, ``eta_d`` the absolute dual
    feasibility, ``eta_relgap`` the relative duality gap and ``eta_classo``
    the larger of the two feasibility measures.
    """
    eta_p = primal_infeasibility(data, pt.x)
    eta_d = dual_infeasibility(data, pt.u, pt.v, pt.w)
    obj_p = objective_primal(data, pt.x)
    obj_d = objective_dual(data, pt.u, pt.v)
    relgap = (obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
    return Residuals(eta_p, eta_d, relgap, max(eta_p, eta_d))


def lambda_from_fraction(A, b, lambda_l: float) -> float:
    """Penalty weight ``lambda_l * ||A^T b||_inf``."""
    if not 0.0 < lambda_l < 1.0:
        raise ValueError(f"lambda_l must lie in (0, 1), got {lambda_l}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.ravel(np.asarray(b, dtype=float))
    if A.shape[0] != b.shape[0]:
        raise DimensionError(f"A has {A.shape[0]} rows but len(b)={b.shape[0]}")
    scale = float(np.max(np.abs(A.T @ b))) if A.size else 0.0
    if scale == 0.0:
        raise DegenerateInstanceError("A^T b is identically zero; lambda would be zero")
    return lambda_l * scale


def nnz(x, fraction: float = 0.999) -> int:
    """Number of largest-magnitude entries needed to capture 99.9% of ``||x||_1``.

    The zero vector has ``nnz == 0``.
    """
    mags = np.sort(np.abs(np.ravel(np.asarray(x, dtype=float))))[::-1]
    cums = np.cumsum(mags)
    total = cums[-1] if cums.size else 0.0
    if total == 0.0:
        return 0
    return int(np.searchsorted(cums, fraction * total, side="left")) + 1
