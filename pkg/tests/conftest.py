import pytest

from chainfrac.effective import build_effective
from chainfrac.potentials import LennardJones


@pytest.fixture(scope="session")
def lj():
    return LennardJones(1.0, 2.0)


@pytest.fixture(scope="session")
def eff(lj):
    return build_effective(lj)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
