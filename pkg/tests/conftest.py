import numpy as np
import pytest


def cubic_sum():
    """f(x) = sum x_i^3 with gradient and Hessian; its Hessian is 6-Lipschitz."""
    f = lambda x: float(np.sum(np.asarray(x) ** 3))
    g = lambda x: 3 * np.asarray(x) ** 2
    H = lambda x: np.diag(6 * np.asarray(x))
    return f, g, H


class Counter:
    """Callable wrapper counting calls."""

    def __init__(self, func):
        self.func = func
        self.calls = 0

    def __call__(self, x):
        self.calls += 1
        return self.func(x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
