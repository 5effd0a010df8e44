import numpy as np
import pytest
from hypothesis import settings

from stoptime import BaseNorm, SpaceTag

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

L1 = BaseNorm.lp(1)
L2 = BaseNorm.lp(2)
LINF = BaseNorm.lp(np.inf)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def S1():
    return SpaceTag.S(L1)


@pytest.fixture
def D1():
    return SpaceTag.D(L1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
