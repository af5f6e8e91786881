import numpy as np
import pytest

from uotprox.core import UotProblem
from uotprox.experiments import build_gaussian_preset, compute_reference, random_problem


@pytest.fixture(scope="session")
def preset():
    return build_gaussian_preset()


@pytest.fixture(scope="session")
def reference(preset):
    # beta=0.005, 10000 outer iterations, one sweep each
    return compute_reference(preset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def problem_4_1():
    # a=[4], b=[1], C=[[0]]; optimum p* = 2
    return UotProblem([4.0], [1.0], [[0.0]])


def small_problem(n=5, m=5, seed=0, lambda1=1.0, lambda2=1.0):
    return random_problem(n, m, seed, lambda1, lambda2)


# (criterion number, verdict line) pairs filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
