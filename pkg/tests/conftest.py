import sys

import numpy as np
import pytest
from hypothesis import settings

from dmsolitons import DiffractionProfile, QuadratureRule, solve

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def two_step():
    return DiffractionProfile.two_step()


@pytest.fixture(scope="session")
def rule(two_step):
    return QuadratureRule.for_profile(two_step)


@pytest.fixture(scope="session")
def soliton(two_step):
    return solve(two_step, lam=1.0, radius=64, dim=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
