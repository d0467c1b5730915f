import numpy as np
import pytest

from interfacemap.domain import CompositeDomain, InitialData, PolyPiece, validate

ACCEPTANCE_LINES = []


def record(line):
    """Acceptance result line, echoed now and again in the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def indicator_problem(s1=1.0, s2=1.0):
    u0 = InitialData([[PolyPiece((-1.0, 0.0), [1.0])], [PolyPiece((0.0, 1.0), [1.0])]])
    return validate(CompositeDomain.infinite([0.0], [s1, s2]), u0)


def bump(a, b, scale=1.0):
    return PolyPiece((a, b), scale * np.polynomial.polynomial.polyfromroots([a, a, b, b]) * 16 / (b - a) ** 4)


@pytest.fixture
def erf_problem():
    return indicator_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
