import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_normalisation_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="trexkit")


@pytest.fixture
def toy_problem():
    """p = 1: x = (1, 0), Y = (2, 1)."""
    from trexkit.trex import RegressionProblem
    return RegressionProblem(np.array([[1.0], [0.0]]), np.array([2.0, 1.0]))


def random_regression(seed, n, p, k=3, sigma=0.5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:min(k, p)] = 1.0
    return X, X @ beta + sigma * rng.standard_normal(n)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[k])
