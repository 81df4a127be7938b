"""Local cost functions ``f_i`` and the per-node suites built from them.

Two families are provided: strongly convex quadratics (closed-form optima,
used throughout the tests) and l2-regularised logistic loss over a
partitioned binary dataset.  Every local objective exposes ``value``,
``grad``, the smoothness constant ``L``, the strong-convexity constant
``mu`` and its infimum ``inf``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import expit

from .exceptions import (
    BadLabel,
    DimensionMismatch,
    EmptyPartition,
    MaxIterExceeded,
    TooFewSamples,
    Unbounded,
)

INF_TOL = 1e-8


class QuadraticObjective:
    """``f(x) = 0.5 x^T A x + b^T x`` with ``A`` symmetric PSD."""

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if A.shape != (b.size, b.size):
            raise DimensionMismatch(f"A is {A.shape}, b has length {b.size}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ValueError("A must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] < -1e-12:
            raise ValueError(f"A is not positive semidefinite (min eigenvalue {eig[0]:.3g})")
        self.A = A
        self.b = b
        self.d = b.size
        self.L = float(eig[-1])
        self.mu = float(max(eig[0], 0.0))
        if self.L <= 0:
            raise Unbounded("A = 0 gives a linear (or constant) cost; need L > 0")
        # lower bound exists iff b lies in range(A)
        x_min, *_ = np.linalg.lstsq(A, -b, rcond=None)
        if np.linalg.norm(A @ x_min + b) > 1e-9 * (1.0 + np.linalg.norm(b)):
            raise Unbounded("b is not in the range of A; f is unbounded below")
        self.minimizer = x_min
        self.inf = float(0.5 * b @ x_min)

    def value(self, x):
        return float(0.5 * x @ self.A @ x + self.b @ x)

    def grad(self, x):
        return self.A @ x + self.b


class LogisticObjective:
    """One node's share of the l2-regularised logistic loss.

    ``f(x) = (1/N) sum_j log(1 + exp(-b_j a_j^T x)) + lam / (2 n) ||x||^2``
    where the sum runs over this node's samples, ``N`` is the global sample
    count and ``n`` the number of nodes, so that the node sum reproduces the
    centralised objective.
    """

    def __init__(self, features, labels, n_total, lam, n_nodes):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or features.shape[0] == 0:
            raise EmptyPartition("node holds no samples")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatch("one label per sample required")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise BadLabel("labels must be -1 or +1")
        if lam <= 0:
            raise ValueError("regularisation lam must be positive")
        self.features = features
        self.labels = labels
        self.n_total = int(n_total)
        self.lam = float(lam)
        self.n_nodes = int(n_nodes)
        self.d = features.shape[1]
        self.mu = self.lam / self.n_nodes
        gram_max = np.linalg.eigvalsh(features.T @ features)[-1]
        self.L = float(gram_max / (4.0 * self.n_total) + self.mu)

    def value(self, x):
        margins = self.labels * (self.features @ x)
        return float(np.logaddexp(0.0, -margins).sum() / self.n_total
                     + 0.5 * self.mu * (x @ x))

    def grad(self, x):
        margins = self.labels * (self.features @ x)
        coef = -self.labels * expit(-margins) / self.n_total
        return self.features.T @ coef + self.mu * x

    @cached_property
    def inf(self):
        _, fmin = centralized_solve(self, tol=INF_TOL)
        return fmin


class SumObjective:
    """``f(x) = sum_i f_i(x)`` with ``L = sum L_i`` and ``mu = sum mu_i``."""

    def __init__(self, parts):
        self.parts = list(parts)
        self.d = self.parts[0].d
        self.L = float(sum(p.L for p in self.parts))
        self.mu = float(sum(p.mu for p in self.parts))

    def value(self, x):
        return float(sum(p.value(x) for p in self.parts))

    def grad(self, x):
        g = self.parts[0].grad(x)
        for p in self.parts[1:]:
            g = g + p.grad(x)
        return g


class ObjectiveSuite:
    """Per-node objectives ``f_1, ..., f_n`` over a common dimension ``d``."""

    def __init__(self, objectives, kind="custom"):
        self.objectives = list(objectives)
        if not self.objectives:
            raise ValueError("suite needs at least one objective")
        dims = {f.d for f in self.objectives}
        if len(dims) != 1:
            raise DimensionMismatch(f"mixed dimensions {sorted(dims)}")
        self.d = dims.pop()
        self.kind = kind
        for i, f in enumerate(self.objectives):
            if not (f.L > 0 and f.L >= f.mu >= 0):
                raise ValueError(f"node {i}: need L > 0 and L >= mu >= 0 (L={f.L}, mu={f.mu})")

    def __len__(self):
        return len(self.objectives)

    def __getitem__(self, i):
        return self.objectives[i]

    @property
    def n(self):
        return len(self.objectives)

    @property
    def Ls(self):
        return np.array([f.L for f in self.objectives])

    @property
    def mus(self):
        return np.array([f.mu for f in self.objectives])

    @property
    def L(self):
        return float(self.Ls.max())

    @property
    def Lbar(self):
        return float(self.Ls.mean())

    @property
    def strongly_convex(self):
        return bool(np.all(self.mus > 0))

    def infs(self):
        return np.array([f.inf for f in self.objectives])

    @cached_property
    def total(self):
        return SumObjective(self.objectives)

    def F(self, X):
        """Separable stacked cost ``sum_i f_i(x_i)`` for ``X`` of shape ``(n, d)``."""
        return float(sum(f.value(x) for f, x in zip(self.objectives, X)))

    def grad_F(self, X):
        return np.stack([f.grad(x) for f, x in zip(self.objectives, X)])


def quadratic_suite(A_list, b_list):
    return ObjectiveSuite([QuadraticObjective(A, b) for A, b in zip(A_list, b_list, strict=True)],
                          kind="quadratic")


def random_quadratic_suite(n, d, seed, mu_range=(0.5, 1.0), L_range=(1.0, 2.0)):
    """Random strongly convex quadratics with eigenvalues in ``[mu_lo, L_hi]``.

    Each ``A_i`` has spectrum drawn so that its smallest eigenvalue lies in
    ``mu_range`` and its largest in ``L_range``; ``b_i`` is standard normal.
    """
    rng = np.random.default_rng(seed)
    As, bs = [], []
    for _ in range(n):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        lo = rng.uniform(*mu_range)
        hi = rng.uniform(*L_range)
        if d == 1:
            eig = np.array([lo])
        else:
            eig = np.concatenate([[lo, hi], rng.uniform(lo, hi, size=d - 2)])
        A = (Q * eig) @ Q.T
        As.append(0.5 * (A + A.T))
        bs.append(rng.standard_normal(d))
    return quadratic_suite(As, bs)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,) in {-1, +1}

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatch("one label per sample required")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise BadLabel("labels must be -1 or +1")

    @property
    def N(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]


def normalize_labels(y, positive=None):
    """Map raw labels to ``{-1, +1}``.

    With ``positive`` given, that class becomes +1 and every other class -1
    (one-vs-rest).  Otherwise exactly two distinct labels are required and
    the larger one becomes +1.
    """
    y = np.asarray(y)
    if positive is not None:
        return np.where(y == positive, 1.0, -1.0)
    classes = np.unique(y)
    if classes.size != 2:
        raise BadLabel(f"expected two classes, found {classes.size}; pass a positive class")
    return np.where(y == classes[1], 1.0, -1.0)


def synthetic_logistic(N, d, seed, noise=0.5):
    """Gaussian features with labels from a planted separator plus noise."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((N, d))
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    b = np.where(A @ w + noise * rng.standard_normal(N) > 0, 1.0, -1.0)
    return Dataset(A, b)


def load_libsvm(path, positive=None, normalize=False):
    """Read a LIBSVM text file (1-based ``idx:val`` pairs) into a dense :class:`Dataset`."""
    from sklearn.datasets import load_svmlight_file

    X, y = load_svmlight_file(str(path))
    X = np.asarray(X.todense(), dtype=float)
    if normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms > 0, norms, 1.0)
    return Dataset(X, normalize_labels(y, positive))


def partition_dataset(ds, n, seed):
    """Shuffle and split ``ds`` into ``n`` parts whose sizes differ by at most one."""
    if ds.N < n:
        raise TooFewSamples(f"{ds.N} samples cannot cover {n} nodes")
    perm = np.random.default_rng(seed).permutation(ds.N)
    return [Dataset(ds.features[idx], ds.labels[idx]) for idx in np.array_split(perm, n)]


def logistic_suite(partition, lam, N_total=None):
    if N_total is None:
        N_total = sum(p.N for p in partition)
    n = len(partition)
    for i, p in enumerate(partition):
        if p.N == 0:
            raise EmptyPartition(f"node {i} has no samples")
    objs = [LogisticObjective(p.features, p.labels, N_total, lam, n) for p in partition]
    return ObjectiveSuite(objs, kind="logistic")


def logistic_loss(ds, x, lam):
    """Centralised regularised logistic objective evaluated on the full dataset."""
    margins = ds.labels * (ds.features @ x)
    return float(np.mean(np.logaddexp(0.0, -margins) + 0.5 * lam * (x @ x)))


def centralized_solve(f, tol=1e-10, x0=None, max_iter=500_000):
    """Minimise ``f`` by gradient descent with step ``1 / f.L``.

    Returns
    -------
    z_star : ndarray
    f_star : float

    Raises
    ------
    MaxIterExceeded
        If ``||grad f|| > tol`` after ``max_iter`` steps.
    """
    x = np.zeros(f.d) if x0 is None else np.array(x0, dtype=float)
    step = 1.0 / f.L
    for _ in range(max_iter):
        g = f.grad(x)
        if np.linalg.norm(g) <= tol:
            return x, f.value(x)
        x = x - step * g
    raise MaxIterExceeded(f"gradient norm {np.linalg.norm(g):.3g} > {tol} after {max_iter} steps")
