"""Undirected communication graphs and their averaging matrices.

A :class:`Graph` is validated on construction (no self-loops, no duplicate
edges, connected).  :func:`metropolis_weights` and :func:`lazy_weights`
produce :class:`Weights`, a symmetric stochastic matrix whose off-diagonal
sparsity matches the edge set, together with its spectral summary.
"""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import (
    DuplicateEdge,
    EigenFailure,
    EndpointOutOfRange,
    GraphError,
    NotConnected,
    NotPositiveDefinite,
    SelfLoop,
)

ROW_SUM_TOL = 1e-12
EIG_TOL = 1e-10


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple  # sorted tuple of (i, j) with i < j
    neighbors: tuple = field(repr=False)  # neighbors[i] is a sorted tuple

    @property
    def degrees(self):
        return np.array([len(nb) for nb in self.neighbors], dtype=int)

    def closed_neighborhood(self, i):
        """Sorted tuple of ``N_i ∪ {i}``."""
        return tuple(sorted(self.neighbors[i] + (i,)))

    def adjacency(self):
        A = np.zeros((self.n, self.n))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A


def build_graph(n, edges):
    """Validate an edge list and return a connected :class:`Graph`.

    Parameters
    ----------
    n : int
        Number of nodes, at least 1.
    edges : iterable of pairs
        Undirected edges ``(i, j)`` with 0-based endpoints.

    Raises
    ------
    SelfLoop, DuplicateEdge, EndpointOutOfRange, NotConnected
    """
    n = int(n)
    if n < 1:
        raise GraphError(f"need at least one node, got n={n}")
    seen = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if not (0 <= i < n and 0 <= j < n):
            raise EndpointOutOfRange(f"edge ({i}, {j}) outside [0, {n})")
        if i == j:
            raise SelfLoop(f"self-loop at node {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge {key} listed twice")
        seen.add(key)

    nbrs = [[] for _ in range(n)]
    for i, j in seen:
        nbrs[i].append(j)
        nbrs[j].append(i)
    neighbors = tuple(tuple(sorted(nb)) for nb in nbrs)

    # breadth-first reachability from node 0
    reached = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in neighbors[u]:
            if v not in reached:
                reached.add(v)
                queue.append(v)
    if len(reached) != n:
        missing = sorted(set(range(n)) - reached)
        raise NotConnected(f"nodes {missing} unreachable from node 0")

    return Graph(n=n, edges=tuple(sorted(seen)), neighbors=neighbors)


def ring(n):
    if n == 1:
        return build_graph(1, [])
    if n == 2:
        return build_graph(2, [(0, 1)])
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def path(n):
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def complete(n):
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def random_gnp(n, p, seed, max_tries=1000):
    """Erdős–Rényi graph conditioned on connectivity.

    Draws are repeated from one seeded generator until a connected graph
    appears, so the result is a deterministic function of ``(n, p, seed)``.
    """
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        keep = rng.random(iu.size) < p
        try:
            return build_graph(n, list(zip(iu[keep].tolist(), ju[keep].tolist())))
        except NotConnected:
            continue
    raise NotConnected(f"no connected G({n}, {p}) sample in {max_tries} draws")


def read_edge_list(path_like, n=None):
    """Read a whitespace separated ``i j`` edge list (0-based, ``#`` comments).

    If ``n`` is omitted it is inferred as ``1 + max endpoint``.
    """
    edges = []
    for raw in Path(path_like).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"bad edge line: {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return build_graph(n, edges)


def write_edge_list(graph, path_like):
    Path(path_like).write_text("".join(f"{i} {j}\n" for i, j in graph.edges))


class Spectrum(NamedTuple):
    beta: float
    lambda_min: float
    lambda_2: float
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns match ``eigenvalues``


def spectral_summary(W):
    """Eigen-decomposition of a symmetric averaging matrix.

    ``beta`` is ``max(|lambda_2|, |lambda_n|)`` with eigenvalues sorted in
    descending order; for a single node it is 0.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=ROW_SUM_TOL):
        raise ValueError("matrix is not symmetric")
    try:
        vals, vecs = np.linalg.eigh(W)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    if vals.size == 1:
        beta, lam2 = 0.0, float(vals[0])
    else:
        lam2 = float(vals[1])
        beta = max(abs(lam2), abs(float(vals[-1])))
    return Spectrum(beta, float(vals[-1]), lam2, vals, vecs)


@dataclass(frozen=True)
class Weights:
    """Averaging matrix ``W`` with its cached spectrum."""

    W: np.ndarray
    graph: Graph
    beta: float
    lambda_min: float
    lambda_2: float

    @property
    def lambda_n(self):
        # smallest eigenvalue; appears in the synchronous DGD step-size rule
        return self.lambda_min

    @property
    def self_weights(self):
        return np.diag(self.W).copy()

    @classmethod
    def from_matrix(cls, W, graph, check=True):
        W = np.array(W, dtype=float)
        W.setflags(write=False)
        if check:
            check_averaging_matrix(W, graph)
        spec = spectral_summary(W)
        return cls(W=W, graph=graph, beta=spec.beta, lambda_min=spec.lambda_min,
                   lambda_2=spec.lambda_2)


def check_averaging_matrix(W, graph):
    """Raise ``ValueError`` unless ``W`` is a valid averaging matrix for ``graph``."""
    n = graph.n
    if W.shape != (n, n):
        raise ValueError(f"W has shape {W.shape}, graph has {n} nodes")
    if not np.array_equal(W, W.T):
        raise ValueError("W is not symmetric")
    if np.any(W < 0):
        raise ValueError("W has negative entries")
    if np.max(np.abs(W.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
        raise ValueError("rows of W do not sum to 1")
    off = W.copy()
    np.fill_diagonal(off, 0.0)
    if not np.array_equal(off > 0, graph.adjacency() > 0):
        raise ValueError("off-diagonal sparsity of W does not match the edge set")


def metropolis_weights(graph):
    """Metropolis–Hastings weights ``w_ij = 1 / (1 + max(deg_i, deg_j))``."""
    n = graph.n
    deg = graph.degrees
    W = np.zeros((n, n))
    for i, j in graph.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        W[i, i] = 1.0 - W[i].sum()
    return Weights.from_matrix(W, graph)


def lazy_weights(graph):
    """Uniform lazy weights ``I - Laplacian / (2 * max degree)``."""
    n = graph.n
    if n == 1:
        return Weights.from_matrix(np.ones((1, 1)), graph)
    A = graph.adjacency()
    lap = np.diag(A.sum(axis=1)) - A
    W = np.eye(n) - lap / (2.0 * graph.degrees.max())
    # force exact symmetry and row sums after the division
    W = np.triu(W, 1)
    W = W + W.T
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return Weights.from_matrix(W, graph)


WEIGHT_SCHEMES = {"metropolis": metropolis_weights, "lazy": lazy_weights}


def ensure_positive_definite(weights):
    """Return ``weights`` if ``W`` is positive definite, else ``(I + W) / 2``.

    The shifted matrix keeps symmetry, stochasticity and off-diagonal
    sparsity; its smallest eigenvalue is ``(1 + lambda_min) / 2``.
    """
    if weights.lambda_min > EIG_TOL:
        return weights
    n = weights.graph.n
    W2 = 0.5 * (np.eye(n) + weights.W)
    W2 = np.triu(W2, 1)
    W2 = W2 + W2.T
    np.fill_diagonal(W2, 0.5 * (1.0 + np.diag(weights.W)))
    shifted = Weights.from_matrix(W2, weights.graph)
    if shifted.lambda_min <= EIG_TOL:
        raise NotPositiveDefinite(
            f"lambda_min(W) = {weights.lambda_min:.3g}; shifted matrix still has "
            f"lambda_min = {shifted.lambda_min:.3g}"
        )
    return shifted
