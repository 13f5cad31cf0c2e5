import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from classo import ProblemData

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")


@pytest.fixture
def tiny():
    """``A = I``, ``b = (1, -1)``, sum-to-zero, ``lam = 0.1``; optimum ``(0.9, -0.9)``."""
    return ProblemData(np.eye(2), np.array([1.0, -1.0]), np.ones((1, 2)), np.zeros(1), 0.1)


@pytest.fixture
def tiny_kkt(tiny):
    """Exact KKT quadruple of ``tiny``."""
    from classo import PrimalDualPoint

    x = np.array([0.9, -0.9])
    u = tiny.A @ x - tiny.b
    v = np.zeros(1)
    w = tiny.B.T @ v - tiny.A.T @ u
    return PrimalDualPoint(x, u, v, w)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, m, n, s, lambda_l=0.1):
    from classo import lambda_from_fraction

    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    B = rng.standard_normal((s, n))
    d = rng.standard_normal(s)
    return ProblemData(A, b, B, d, lambda_from_fraction(A, b, lambda_l))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
