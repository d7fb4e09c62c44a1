from fractions import Fraction

import pytest

from effective_lln.core import FiniteProbabilitySpace

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def fair():
    return FiniteProbabilitySpace.binary(Fraction(1, 2))


@pytest.fixture
def quarter():
    return FiniteProbabilitySpace(["a", "b"], [Fraction(1, 4), Fraction(3, 4)])


@pytest.fixture
def three():
    return FiniteProbabilitySpace(["a", "b", "c"], [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)])
