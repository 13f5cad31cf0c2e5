import numpy as np
import pytest

from classo import DimensionError, ProblemData, SsnalConfig, alm_solve, objective_primal
from classo.transforms import (
    RankDeficientError,
    genlasso_objective,
    genlasso_to_classo,
    recover_solution,
    stacked_identity,
)


def _instance(rng, m=12, n=8, s=5, lam=0.3):
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    D = stacked_identity(rng.standard_normal((s, n)))
    return A, b, D, lam


class TestReduction:
    def test_dimensions(self, rng):
        A, b, D, lam = _instance(rng)
        red = genlasso_to_classo(A, b, D, lam)
        assert (red.p, red.s) == (13, 5)
        assert red.reduced.A.shape == (12, 13)
        assert red.reduced.B.shape == (5, 13)
        np.testing.assert_array_equal(red.reduced.d, np.zeros(5))
        assert red.reduced.lam == lam

    def test_null_space_and_left_inverse(self, rng):
        A, b, D, lam = _instance(rng)
        red = genlasso_to_classo(A, b, D, lam)
        assert np.abs(red.reduced.B @ D).max() < 1e-10
        np.testing.assert_allclose(red.d_pinv @ D, np.eye(8), atol=1e-8)
        sv = np.linalg.svd(red.reduced.B, compute_uv=False)
        np.testing.assert_allclose(sv, np.ones(5), atol=1e-10)

    def test_square_d_rejected(self, rng):
        with pytest.raises(DimensionError, match="unconstrained"):
            genlasso_to_classo(np.eye(3), np.ones(3), np.eye(3), 1.0)

    def test_wide_d_rejected(self):
        with pytest.raises(DimensionError):
            genlasso_to_classo(np.eye(3), np.ones(3), np.ones((2, 3)), 1.0)

    def test_rank_deficient(self, rng):
        D = rng.standard_normal((6, 4))
        D[:, 3] = D[:, 0]
        with pytest.raises(RankDeficientError):
            genlasso_to_classo(rng.standard_normal((5, 4)), np.ones(5), D, 1.0)

    def test_column_mismatch(self, rng):
        with pytest.raises(DimensionError):
            genlasso_to_classo(np.eye(3), np.ones(3), np.ones((5, 4)), 1.0)

    def test_thirty_extra_rows(self, rng):
        A = rng.standard_normal((20, 40))
        red = genlasso_to_classo(A, np.ones(20), stacked_identity(rng.standard_normal((30, 40))), 1.0)
        assert red.reduced.A.shape == (20, 70) and red.s == 30


class TestRecovery:
    def test_left_inverse(self, rng):
        A, b, D, lam = _instance(rng)
        red = genlasso_to_classo(A, b, D, lam)
        x = rng.standard_normal(8)
        np.testing.assert_allclose(recover_solution(red, D @ x), x, atol=1e-10)

    def test_zero(self, rng):
        red = genlasso_to_classo(*_instance(rng))
        np.testing.assert_array_equal(recover_solution(red, np.zeros(13)), np.zeros(8))

    def test_dimension_error(self, rng):
        red = genlasso_to_classo(*_instance(rng))
        with pytest.raises(DimensionError):
            recover_solution(red, np.zeros(8))

    def test_objective_equivalence_on_feasible_points(self, rng):
        A, b, D, lam = _instance(rng)
        red = genlasso_to_classo(A, b, D, lam)
        for _ in range(10):
            z = D @ rng.standard_normal(8)
            x = recover_solution(red, z)
            np.testing.assert_allclose(D @ x, z, atol=1e-8)
            assert objective_primal(red.reduced, z) == pytest.approx(
                genlasso_objective(A, b, D, lam, x), rel=1e-10
            )

    def test_round_trip_optimum(self, rng):
        A, b, D, lam = _instance(rng)
        red = genlasso_to_classo(A, b, D, lam)
        res = alm_solve(red.reduced, SsnalConfig(eps=1e-9))
        assert res.converged
        x = recover_solution(red, res.point.x)
        reduced_obj = objective_primal(red.reduced, res.point.x)
        assert genlasso_objective(A, b, D, lam, x) == pytest.approx(reduced_obj, rel=1e-6)
