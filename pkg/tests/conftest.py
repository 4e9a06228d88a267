import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "condlab",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("condlab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def identity_field(n):
    eye = np.eye(n)

    def W(x):
        return np.broadcast_to(eye, np.asarray(x).shape[:-1] + (n, n)).copy()

    return W


def scaled_field(W, c):
    return lambda x: c * W(x)


# lines recorded by test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
