import numpy as np
import pytest

from prodtail import DiscreteFinite, FGM, Pareto

CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def pareto21():
    return Pareto(2.0, 1.0)


@pytest.fixture
def two_point_12():
    return DiscreteFinite((1.0, 2.0), (0.5, 0.5))


@pytest.fixture
def fgm_half():
    return FGM(0.5)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: int(k.split()[0])):
        passed, detail = CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key}: {detail}")
