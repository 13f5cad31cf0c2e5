"""Proximal maps of ``lam ||.||_1`` and of its conjugate, and the active set
of the soft-thresholding generalized Jacobian."""

from __future__ import annotations

import dataclasses

import numpy as np


def prox_l1(z, t: float) -> np.ndarray:
    """Soft-thresholding: ``sign(z) * max(|z| - t, 0)``."""
    if not t > 0:
        raise ValueError(f"threshold must be positive, got {t}")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def proj_linf(z, lam: float) -> np.ndarray:
    """Projection onto the box ``{w : ||w||_inf <= lam}``."""
    if not lam > 0:
        raise ValueError(f"radius must be positive, got {lam}")
    return np.clip(np.asarray(z, dtype=float), -lam, lam)


@dataclasses.dataclass(frozen=True)
class ActiveSet:
    """Indices where the soft-threshold is differentiable with slope one.

    The diagonal 0/1 element ``Q`` of the Clarke Jacobian of ``prox_l1`` is
    represented by the sorted positions of its ones.
    """

    indices: np.ndarray

    @property
    def r(self) -> int:
        return int(self.indices.shape[0])

    def mask(self, n: int) -> np.ndarray:
        q = np.zeros(n)
        q[self.indices] = 1.0
        return q


def clarke_diag(z, sigma_lambda: float) -> ActiveSet:
    """Active set ``{i : |z_i| > sigma_lambda}``; ties go to the inactive side."""
    z = np.asarray(z, dtype=float)
    return ActiveSet(np.flatnonzero(np.abs(z) > sigma_lambda))
