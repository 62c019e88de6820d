import sys

import numpy as np
import pytest

from fourier_shapes import CanvasSpec, FourierCoefficients


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_circle():
    return FourierCoefficients.from_dict({1: 1.0})


@pytest.fixture
def canvas32():
    return CanvasSpec(32, 32)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
