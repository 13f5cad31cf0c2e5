import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from classo import (
    DegenerateInstanceError,
    DimensionError,
    PrimalDualPoint,
    ProblemData,
    lambda_from_fraction,
    objective_dual,
    objective_primal,
    residuals,
)
from classo.problem import nnz

from conftest import random_instance
from oracle import solve_by_enumeration

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestProblemData:
    def test_dimensions(self, tiny):
        assert (tiny.m, tiny.n, tiny.s) == (2, 2, 1)

    def test_read_only(self, tiny):
        with pytest.raises(ValueError):
            tiny.A[0, 0] = 5.0

    def test_column_major(self, tiny):
        assert tiny.A.flags.f_contiguous and tiny.B.flags.f_contiguous

    @pytest.mark.parametrize(
        "A, b, B, d",
        [
            (np.eye(2), np.ones(3), np.ones((1, 2)), np.zeros(1)),
            (np.eye(2), np.ones(2), np.ones((1, 3)), np.zeros(1)),
            (np.eye(2), np.ones(2), np.ones((1, 2)), np.zeros(2)),
        ],
    )
    def test_mismatched_shapes(self, A, b, B, d):
        with pytest.raises(DimensionError):
            ProblemData(A, b, B, d, 1.0)

    def test_no_constraints_rejected(self):
        with pytest.raises(DimensionError):
            ProblemData(np.eye(2), np.ones(2), np.zeros((0, 2)), np.zeros(0), 1.0)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_nonpositive_lambda(self, lam):
        with pytest.raises(ValueError):
            ProblemData(np.eye(2), np.ones(2), np.ones((1, 2)), np.zeros(1), lam)

    def test_with_lambda(self, tiny):
        other = tiny.with_lambda(0.5)
        assert other.lam == 0.5 and other.A is tiny.A


class TestObjectives:
    def test_primal_zero(self):
        data = ProblemData(np.eye(2), np.zeros(2), np.ones((1, 2)), np.zeros(1), 1.0)
        assert objective_primal(data, np.zeros(2)) == 0.0

    def test_primal_tiny_optimum(self, tiny):
        assert objective_primal(tiny, np.array([0.9, -0.9])) == pytest.approx(0.19, abs=1e-15)

    def test_primal_hand_expanded(self):
        data = ProblemData(np.eye(2), np.array([2.0, 0.0]), np.ones((1, 2)), np.zeros(1), 1.0)
        assert objective_primal(data, np.array([1.0, 0.0])) == 1.5

    def test_primal_dimension_error(self, tiny):
        with pytest.raises(DimensionError):
            objective_primal(tiny, np.zeros(3))

    def test_dual_zero(self, tiny):
        assert objective_dual(tiny, np.zeros(2), np.zeros(1)) == 0.0

    def test_dual_hand_expanded(self):
        data = ProblemData(np.eye(2), np.ones(2), np.ones((1, 2)), np.zeros(1), 1.0)
        assert objective_dual(data, np.array([-1.0, -1.0]), np.array([7.0])) == 1.0

    def test_dual_dimension_error(self, tiny):
        with pytest.raises(DimensionError):
            objective_dual(tiny, np.zeros(2), np.zeros(2))

    def test_strong_duality_at_oracle_point(self, tiny, tiny_kkt):
        gap = objective_primal(tiny, tiny_kkt.x) - objective_dual(tiny, tiny_kkt.u, tiny_kkt.v)
        assert abs(gap) < 1e-8

    @given(st.integers(0, 2**32 - 1))
    def test_weak_duality(self, seed):
        rng = np.random.default_rng(seed)
        data = random_instance(rng, 6, 5, 2)
        # feasible x: any point plus a correction onto {Bx = d}
        x = rng.standard_normal(5)
        x -= np.linalg.lstsq(data.B, data.B @ x - data.d, rcond=None)[0]
        u = rng.standard_normal(6)
        v = rng.standard_normal(2)
        w = data.B.T @ v - data.A.T @ u
        scale = max(1.0, np.abs(w).max() / data.lam)
        u, v = u / scale, v / scale
        assert objective_dual(data, u, v) <= objective_primal(data, x) + 1e-9


class TestResiduals:
    def test_exact_kkt(self, tiny, tiny_kkt):
        res = residuals(tiny, tiny_kkt)
        assert res.eta_p == 0.0 and res.eta_d == 0.0 and res.eta_classo == 0.0

    def test_primal_infeasibility_value(self, tiny):
        pt = PrimalDualPoint(np.ones(2), np.zeros(2), np.zeros(1), np.zeros(2))
        assert residuals(tiny, pt).eta_p == 2.0

    def test_oracle_point_of_tiny(self, tiny):
        sol = solve_by_enumeration(tiny.A, tiny.b, tiny.B, tiny.d, tiny.lam)
        u = tiny.A @ sol.x - tiny.b
        v = np.linalg.lstsq(tiny.B.T, tiny.A.T @ u + tiny.lam * np.sign(sol.x), rcond=None)[0]
        w = tiny.B.T @ v - tiny.A.T @ u
        assert residuals(tiny, PrimalDualPoint(sol.x, u, v, w)).eta_classo < 1e-8

    def test_classo_is_max(self, tiny, rng):
        pt = PrimalDualPoint(rng.standard_normal(2), rng.standard_normal(2),
                             rng.standard_normal(1), rng.standard_normal(2))
        res = residuals(tiny, pt)
        assert res.eta_classo == max(res.eta_p, res.eta_d)
        assert res.eta_p >= 0 and res.eta_d >= 0

    def test_dimension_error(self, tiny):
        pt = PrimalDualPoint(np.zeros(3), np.zeros(2), np.zeros(1), np.zeros(2))
        with pytest.raises(DimensionError):
            residuals(tiny, pt)


class TestLambdaFromFraction:
    def test_max_abs(self):
        assert lambda_from_fraction(np.eye(2), np.array([1.0, -2.0]), 0.1) == pytest.approx(0.2)

    def test_single_column(self):
        assert lambda_from_fraction(np.ones((2, 1)), np.ones(2), 0.5) == 1.0

    def test_zero_response(self):
        with pytest.raises(DegenerateInstanceError):
            lambda_from_fraction(np.eye(2), np.zeros(2), 0.1)

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.5, 2.0])
    def test_fraction_out_of_range(self, frac):
        with pytest.raises(ValueError):
            lambda_from_fraction(np.eye(2), np.ones(2), frac)

    @given(st.floats(1e-3, 1e3), st.integers(0, 1000))
    def test_homogeneous_in_b(self, c, seed):
        rng = np.random.default_rng(seed)
        A, b = rng.standard_normal((4, 3)), rng.standard_normal(4)
        assert lambda_from_fraction(A, c * b, 0.3) == pytest.approx(c * lambda_from_fraction(A, b, 0.3))


class TestNnz:
    @pytest.mark.parametrize(
        "x, expected", [((10, 0.001, 0), 1), ((1, 1), 2), ((0, 0, 0), 0), ((), 0)]
    )
    def test_examples(self, x, expected):
        assert nnz(np.array(x, dtype=float)) == expected

    @given(arrays(np.float64, st.integers(1, 30), elements=finite), st.integers(0, 1000))
    def test_permutation_and_sign_invariance(self, x, seed):
        rng = np.random.default_rng(seed)
        y = rng.permutation(x) * rng.choice([-1.0, 1.0], size=x.size)
        assert nnz(x) == nnz(y)

    @given(arrays(np.float64, st.integers(1, 30), elements=finite))
    def test_definition(self, x):
        k = nnz(x)
        mags = np.sort(np.abs(x))[::-1]
        total = mags.sum()
        if total == 0:
            assert k == 0
            return
        assert mags[:k].sum() >= 0.999 * total * (1 - 1e-12)
        assert k == 1 or mags[: k - 1].sum() < 0.999 * total
