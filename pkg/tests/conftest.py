import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qcqp_exact.model import make_instance

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store a one-line acceptance outcome printed in the terminal summary."""

    def _record(criterion, passed, detail=""):
        ACCEPTANCE[criterion] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def one_d(a_obj, b_obj, c_obj, cons):
    """1-D instance from scalars; ``cons`` holds ``(a, b, c, sense)`` tuples."""
    return make_instance(
        (np.array([[a_obj]]), np.array([b_obj]), c_obj),
        [(np.array([[a]]), np.array([b]), c, s) for a, b, c, s in cons],
    )


@pytest.fixture
def trust_1d():
    # q_obj = x^2 - 2x, q1 = x^2 - 1 <= 0
    return one_d(1.0, -1.0, 0.0, [(1.0, 0.0, -1.0, "le")])


@pytest.fixture
def concave_1d():
    # q_obj = -x^2, q1 = x^2 - 1 <= 0
    return one_d(-1.0, 0.0, 0.0, [(1.0, 0.0, -1.0, "le")])


def random_sym(rng, n):
    M = rng.standard_normal((n, n))
    return 0.5 * (M + M.T)
