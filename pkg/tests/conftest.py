import numpy as np
import pytest

from sdarl.datagen import GenSpec, make_dataset


@pytest.fixture
def small_linear():
    ds = make_dataset(GenSpec(model="linear", n=60, p=40, K=4, rho=0.2, R=10, sigma1=0.1, seed=3))
    return ds


@pytest.fixture
def small_logistic():
    ds = make_dataset(GenSpec(model="logistic", n=120, p=40, K=3, rho=0.2, R=3, seed=3))
    return ds


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
