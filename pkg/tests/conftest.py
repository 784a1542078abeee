import numpy as np
import pytest

from commpert.hilbert import OperatorMatrix, build_space


def random_hermitian(rng, n):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (m + m.conj().T) / 2


def random_operator(space, rng, hermitian=False):
    n = space.total_dim
    if hermitian:
        return OperatorMatrix(space, random_hermitian(rng, n), hermitian=True)
    return OperatorMatrix(space, rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def space4():
    return build_space([4])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
