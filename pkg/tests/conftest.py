import numpy as np
import pytest

from netdisrupt import make_network

TOY_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "data" / "toy"


def star_matrix(n=6):
    a = np.zeros((n, n))
    a[0, 1:] = 1
    a[1:, 0] = 1
    return a


def line_matrix(n=6):
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1
    return a


def random_binary(rng, n, p, diagonal="zero"):
    a = np.triu((rng.random((n, n)) < p).astype(float), 1)
    a = a + a.T
    if diagonal == "keep":
        np.fill_diagonal(a, rng.integers(0, 2, n))
    return make_network(a, diagonal=diagonal)


def random_symmetric(rng, n, scale=1.0):
    a = rng.normal(scale=scale, size=(n, n))
    return make_network((a + a.T) / 2, diagonal="keep")


@pytest.fixture
def toy():
    """(treated line, control star) with zero diagonals."""
    return make_network(line_matrix(), diagonal="zero", group=1), make_network(star_matrix(), diagonal="zero")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance lines collected by tests/test_acceptance.py and echoed at the end of the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
