import sys
import numpy as np
import pytest

from branchkit.model import Constant, JointTable, Poisson, single_type
from branchkit.modelio import load_model


@pytest.fixture(scope="session")
def slight():
    return load_model("slightly_supercritical")


@pytest.fixture(scope="session")
def steep():
    return load_model("very_supercritical")


@pytest.fixture(scope="session")
def binary():
    """p(0) = 1/4, p(2) = 3/4; extinction probability 1/3."""
    return single_type(JointTable([([0], 0.25), ([2], 0.75)]))


@pytest.fixture(scope="session")
def doubling():
    return single_type(Constant(2))


@pytest.fixture(scope="session")
def poisson2():
    return single_type(Poisson(2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
