import numpy as np
import pytest

from nestassort.model import NestedLogitInstance


def random_instance(rng, m, n, gamma_low=0.0, v_high=1.0):
    r = rng.uniform(0.0, 1.0, size=(m, n))
    v = rng.uniform(0.05, v_high, size=(m, n))
    g = rng.uniform(gamma_low, 1.0, size=m)
    return NestedLogitInstance(r, v, g, c_v=v_high)


def random_combination(rng, m, n):
    return tuple(tuple(int(j) for j in np.flatnonzero(rng.random(n) < 0.5)) for _ in range(m))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy():
    # one nest, r = (1, 0.5), v = (1, 3), gamma = 0.5
    return NestedLogitInstance([[1.0, 0.5]], [[1.0, 3.0]], [0.5], c_v=3.0)


ACCEPTANCE_LINES = []


def report_criterion(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
