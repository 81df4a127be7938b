import numpy as np
import pytest

from asyncdgd import topology as topo
from asyncdgd.objectives import quadratic_suite, random_quadratic_suite
from asyncdgd.operators import AlgorithmSpec, default_step_size

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def two_node_suite(c=(0.0, 2.0)):
    """f_i(x) = 1/2 (x - c_i)^2 - 1/2 c_i^2 on the real line."""
    return quadratic_suite([np.eye(1), np.eye(1)], [np.array([-c[0]]), np.array([-c[1]])])


def two_node_spec(kind="dgd", alpha=0.5, W=((0.5, 0.5), (0.5, 0.5)), c=(0.0, 2.0)):
    g = topo.build_graph(2, [(0, 1)])
    w = topo.Weights.from_matrix(np.array(W, dtype=float), g)
    return AlgorithmSpec(kind, alpha, w, two_node_suite(c))


def ring_quadratic_spec(kind="dgd", n=8, d=3, seed=0, alpha=None):
    g = topo.ring(n)
    w = topo.metropolis_weights(g)
    if kind == "atc":
        w = topo.ensure_positive_definite(w)
    suite = random_quadratic_suite(n, d, seed)
    a = default_step_size(kind, w, suite) if alpha is None else alpha
    return AlgorithmSpec(kind, a, w, suite)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
