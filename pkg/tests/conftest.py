import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wavecheck.problems import scalar_operator
from wavecheck.scheme import SchemeParams, run

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def unit_op():
    return scalar_operator(1.0)


@pytest.fixture
def scalar_run(unit_op):
    """Leap-frog on ``u'' + u = 0``, ``u(0) = 1``, ``u'(0) = 0``, ``k = 0.1``, ``N = 2``."""
    return run(unit_op, SchemeParams.leapfrog(), [1.0], [0.0], None, 0.1, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[c])
