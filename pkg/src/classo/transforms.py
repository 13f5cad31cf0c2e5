"""Reduction of the generalized Lasso ``min 1/2||Ax - b||^2 + lam ||Dx||_1`` with
a tall, full-column-rank ``D`` to a constrained Lasso in ``z = Dx``."""

from __future__ import annotations

import dataclasses

import numpy as np

from .problem import DimensionError, ProblemData

RANK_TOL = 1e-10


class RankDeficientError(ValueError):
    pass


@dataclasses.dataclass(frozen=True, eq=False)
class GenLassoReduction:
    """Constrained Lasso equivalent of a generalized Lasso.

    Attributes:
      reduced: instance with ``A D^+``, ``B = U_2^T``, ``d = 0`` and the same ``lam``.
      d_pinv: ``D^+ = V_1 Sigma_1^{-1} U_1^T`` (n x p).
      p: number of rows of ``D`` (variable dimension of the reduced problem).
      s: ``p - n``, the number of equality constraints.
    """

    reduced: ProblemData
    d_pinv: np.ndarray
    p: int
    s: int
    D: np.ndarray


def genlasso_to_classo(A, b, D, lam: float, rank_tol: float = RANK_TOL) -> GenLassoReduction:
    """Build the equivalent constrained Lasso via a full SVD of ``D``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p, n = D.shape
    if A.shape[1] != n:
        raise DimensionError(f"A has {A.shape[1]} columns but D has {n}")
    if p < n:
        raise DimensionError(f"D must have at least as many rows as columns, got {D.shape}")
    if p == n:
        raise DimensionError(
            "D is square: the problem reduces to an unconstrained Lasso, which has no "
            "equality constraints"
        )
    U, sv, Vt = np.linalg.svd(D, full_matrices=True)
    if sv[-1] <= rank_tol * sv[0]:
        raise RankDeficientError(
            f"D is rank deficient (sigma_min/sigma_max = {sv[-1] / sv[0]:.2e})"
        )
    U1, U2 = U[:, :n], U[:, n:]
    d_pinv = (Vt.T / sv) @ U1.T
    reduced = ProblemData(A @ d_pinv, b, U2.T, np.zeros(p - n), lam)
    return GenLassoReduction(reduced, d_pinv, p, p - n, D)


def recover_solution(reduction: GenLassoReduction, z) -> np.ndarray:
    """Map a reduced solution back: ``x = D^+ z``."""
    z = np.asarray(z, dtype=float)
    if z.shape != (reduction.p,):
        raise DimensionError(f"z must have length {reduction.p}, got shape {z.shape}")
    return reduction.d_pinv @ z


def genlasso_objective(A, b, D, lam: float, x) -> float:
    r = np.asarray(A) @ x - b
    return 0.5 * float(r @ r) + lam * float(np.abs(np.asarray(D) @ x).sum())


def stacked_identity(D2) -> np.ndarray:
    """``D = [I_n; D_2]``, which always has full column rank."""
    D2 = np.atleast_2d(np.asarray(D2, dtype=float))
    return np.vstack([np.eye(D2.shape[1]), D2])
