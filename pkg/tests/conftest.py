import numpy as np
import pytest
from hypothesis import settings

from robustgsl.graph import Graph, sbm_generate

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_symmetric(rng, n, density=0.5, weighted=True):
    """Random symmetric matrix in [0, 1] with zero diagonal."""
    U = rng.random((n, n)) if weighted else np.ones((n, n))
    mask = rng.random((n, n)) < density
    U = np.triu(U * mask, k=1)
    return U + U.T


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of the scalar ``f`` at array ``x``."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        k = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_graph():
    # path 0-1-2-3 plus an isolated node 4
    A = np.zeros((5, 5))
    for i, j in [(0, 1), (1, 2), (2, 3)]:
        A[i, j] = A[j, i] = 1.0
    X = np.array([[1.0, 0.0], [0.9, 0.1], [0.2, 0.8], [0.0, 1.0], [0.5, 0.5]])
    y = np.array([0, 0, 1, 1, 0])
    return Graph(A, X, y, [0, 3], [1], [2, 4])


@pytest.fixture(scope="session")
def small_sbm():
    graph, _ = sbm_generate(30, 2, 0.3, 0.02, feature_noise=0.8, seed=7)
    return graph


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES = []


def record_criterion(name, passed, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
