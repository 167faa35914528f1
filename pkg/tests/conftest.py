import numpy as np
import pytest

from qcoreset.dataset import BinaryDataset


def two_blobs(n_per_class=30, d=2, shift=1.0, seed=0):
    """Two Gaussian clouds at -shift and +shift on every axis, labels +1 / -1."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-shift, 1.0, (n_per_class, d)),
                   rng.normal(shift, 1.0, (n_per_class, d))])
    y = np.r_[np.ones(n_per_class), -np.ones(n_per_class)]
    return BinaryDataset(X, y, (1, 2))


@pytest.fixture
def blobs60():
    return two_blobs(30, 2, 1.0, seed=0)


@pytest.fixture
def two_point():
    """x1=(0,0) labelled +1 and x2=(2,0) labelled -1."""
    return np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([1.0, -1.0])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
