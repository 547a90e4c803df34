import pytest

from asyncfir.dsp import FilterSpec, design_equiripple, quantize


@pytest.fixture(scope="session")
def spec():
    return FilterSpec()


@pytest.fixture(scope="session")
def coeffs(spec):
    return quantize(design_equiripple(spec))


@pytest.fixture(scope="session")
def small_coeffs():
    """A short 5-tap filter for structural tests that need speed."""
    import numpy as np
    from asyncfir.dsp import Coefficients

    taps = np.array([0.1, -0.25, 0.5, -0.25, 0.1])
    return quantize(Coefficients(taps))


def pytest_terminal_summary(terminalreporter):
    from helpers import CRITERIA

    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda l: int(l.split()[1].rstrip("]"))):
            terminalreporter.write_line(line)
