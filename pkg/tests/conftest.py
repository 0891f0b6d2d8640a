import sys

import numpy as np
import pytest

from facetqp.linalg import SparseSymMatrix


def random_spd(rng, n, shift=1.0):
    B = rng.standard_normal((n, n))
    return B @ B.T + shift * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spd(rng):
    def make(n, shift=1.0):
        M = random_spd(rng, n, shift)
        return M, SparseSymMatrix.from_dense(M)
    return make


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
