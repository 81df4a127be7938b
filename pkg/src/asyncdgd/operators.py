"""Synchronous DGD / DGD-ATC operators and the quantities derived from them.

States are stacked as arrays of shape ``(n, d)``: row ``i`` is node ``i``'s
block ``x_i``.  Both algorithms are written as a fixed-point map ``T``::

    DGD:      T(x)_i = sum_{j in N_i + i} w_ij x_j - alpha * grad f_i(x_i)
    DGD-ATC:  T(x)_i = sum_{j in N_i + i} w_ij (x_j - alpha * grad f_j(x_j))

The block form :func:`operator_T_block` is the single kernel that both the
synchronous step and the asynchronous engines call, which is what makes the
synchronous special case of the asynchronous run bit-identical to
:func:`sync_step`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DimensionMismatch,
    MaxIterExceeded,
    MissingInf,
    NotPositiveDefinite,
    NotStronglyConvex,
    StepTooLarge,
    ZeroSelfWeight,
)
from .topology import EIG_TOL

DGD = "dgd"
ATC = "atc"
KINDS = (DGD, ATC)

STEP_MARGIN_TOL = 1e-12

_KIND_ALIASES = {"dgd": DGD, "atc": ATC, "dgd-atc": ATC, "dgd_atc": ATC}


def normalize_kind(kind):
    try:
        return _KIND_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown algorithm kind {kind!r}; expected one of {KINDS}") from None


def max_step_size(kind, weights, suite):
    """Supremum of admissible step sizes.

    DGD: ``2 * min_i w_ii / L_i``.  DGD-ATC: ``2 / max_i L_i`` (and ``W`` must
    be positive definite).
    """
    kind = normalize_kind(kind)
    if kind == DGD:
        w = weights.self_weights
        if np.any(w <= 0):
            raise ZeroSelfWeight(f"nodes {np.flatnonzero(w <= 0).tolist()} have w_ii = 0")
        return float(2.0 * np.min(w / suite.Ls))
    if weights.lambda_min <= EIG_TOL:
        raise NotPositiveDefinite(f"DGD-ATC needs W > 0, lambda_min = {weights.lambda_min:.3g}")
    return 2.0 / suite.L


def default_step_size(kind, weights, suite):
    """Step sizes used in the logistic-regression experiments.

    DGD: ``min_i w_ii / max_i L_i``; DGD-ATC: ``1 / max_i L_i``.  Both are at
    most half of :func:`max_step_size`.
    """
    kind = normalize_kind(kind)
    bound = max_step_size(kind, weights, suite)  # raises on degenerate inputs
    if kind == DGD:
        return float(np.min(weights.self_weights) / suite.L)
    return 0.5 * bound


@dataclass(frozen=True)
class AlgorithmSpec:
    """Algorithm kind, step size, averaging matrix and local costs.

    Unless ``unsafe`` is set, construction enforces ``0 < alpha < max_step_size``
    and, for DGD-ATC, ``W > 0``.
    """

    kind: str
    alpha: float
    weights: object
    suite: object
    unsafe: bool = False
    _nbrs: tuple = field(init=False, repr=False, compare=False)
    _wts: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        object.__setattr__(self, "alpha", float(self.alpha))
        n = self.weights.graph.n
        if self.suite.n != n:
            raise DimensionMismatch(f"suite has {self.suite.n} nodes, graph has {n}")
        if not self.alpha > 0:
            raise StepTooLarge(f"alpha must be positive, got {self.alpha}")
        if not self.unsafe:
            bound = max_step_size(self.kind, self.weights, self.suite)
            if self.alpha >= bound:
                rule = "2*min_i(w_ii/L_i)" if self.kind == DGD else "2/max_i(L_i)"
                raise StepTooLarge(
                    f"alpha={self.alpha:.6g} violates alpha < {rule} = {bound:.6g}"
                )
        W = self.weights.W
        nbrs = tuple(self.weights.graph.closed_neighborhood(i) for i in range(n))
        wts = tuple(tuple(float(W[i, j]) for j in nb) for i, nb in enumerate(nbrs))
        object.__setattr__(self, "_nbrs", nbrs)
        object.__setattr__(self, "_wts", wts)

    @property
    def n(self):
        return self.weights.graph.n

    @property
    def d(self):
        return self.suite.d

    def closed_neighborhood(self, i):
        return self._nbrs[i]

    def with_alpha(self, alpha, unsafe=None):
        return AlgorithmSpec(self.kind, alpha, self.weights, self.suite,
                             self.unsafe if unsafe is None else unsafe)


def check_state(spec, X):
    X = np.asarray(X, dtype=float)
    if X.shape != (spec.n, spec.d):
        raise DimensionMismatch(f"state has shape {X.shape}, expected {(spec.n, spec.d)}")
    return X


def combine(spec, i, vectors):
    """``sum_j w_ij v_j`` over node ``i``'s closed neighborhood, in sorted order.

    ``vectors`` is aligned with :meth:`AlgorithmSpec.closed_neighborhood`.
    The accumulation order is fixed so every caller gets identical bits.
    """
    wts = spec._wts[i]
    acc = wts[0] * vectors[0]
    for w, v in zip(wts[1:], vectors[1:]):
        acc = acc + w * v
    return acc


def adapt(spec, j, x_j):
    """Local gradient step ``x_j - alpha * grad f_j(x_j)`` (the ATC message)."""
    return x_j - spec.alpha * spec.suite[j].grad(x_j)


def operator_T_block(spec, i, Z):
    """Block ``i`` of ``T`` evaluated on an arbitrary stacked argument ``Z``."""
    Z = check_state(spec, Z)
    nb = spec._nbrs[i]
    if spec.kind == DGD:
        return combine(spec, i, [Z[j] for j in nb]) - spec.alpha * spec.suite[i].grad(Z[i])
    return combine(spec, i, [adapt(spec, j, Z[j]) for j in nb])


def sync_step(spec, X):
    """One synchronous iteration ``x+ = T(x)``."""
    X = check_state(spec, X)
    out = np.empty_like(X)
    if spec.kind == DGD:
        for i in range(spec.n):
            nb = spec._nbrs[i]
            out[i] = combine(spec, i, [X[j] for j in nb]) - spec.alpha * spec.suite[i].grad(X[i])
    else:
        Y = [adapt(spec, j, X[j]) for j in range(spec.n)]
        for i in range(spec.n):
            out[i] = combine(spec, i, [Y[j] for j in spec._nbrs[i]])
    return out


def operator_T(spec, X):
    return sync_step(spec, X)


def block_max_norm(X):
    """``max_i ||x_i||`` over the rows of a stacked state."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    return float(np.max(np.linalg.norm(X, axis=1)))


def block_max_distance(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise DimensionMismatch(f"shapes {X.shape} and {Y.shape} differ")
    return block_max_norm(X - Y)


def contraction_factor(spec):
    """Pseudo-contraction modulus ``rho`` of ``T`` in the block-max norm.

    DGD:      ``sqrt(1 - alpha * min_i mu_i (2 - alpha L_i / w_ii))``
    DGD-ATC:  ``sqrt(1 - alpha * min_i mu_i (2 - alpha L_i))``
    """
    mus, Ls, a = spec.suite.mus, spec.suite.Ls, spec.alpha
    if np.any(mus <= 0):
        raise NotStronglyConvex(f"nodes {np.flatnonzero(mus <= 0).tolist()} have mu_i = 0")
    if spec.kind == DGD:
        w = spec.weights.self_weights
        if np.any(w <= 0):
            raise ZeroSelfWeight("w_ii = 0 makes the DGD modulus undefined")
        margin = 2.0 - a * Ls / w
    else:
        margin = 2.0 - a * Ls
    # margin <= 0 at any node means alpha sits on or beyond the step-size bound
    if np.min(margin) <= STEP_MARGIN_TOL:
        raise StepTooLarge(f"alpha={a:.6g} is at or beyond the step-size bound; rho >= 1")
    rho_sq = 1.0 - a * np.min(mus * margin)
    if not rho_sq < 1.0:
        raise StepTooLarge(f"alpha={a:.6g} gives rho >= 1")
    return math.sqrt(max(rho_sq, 0.0))


def _require_pd(spec):
    if spec.kind == ATC and spec.weights.lambda_min <= EIG_TOL:
        raise NotPositiveDefinite(
            f"DGD-ATC fixed points need W > 0; lambda_min = {spec.weights.lambda_min:.3g}"
        )


def solve_fixed_point(spec, x0=None, tol=1e-10, max_iter=1_000_000):
    """Iterate the synchronous map until successive iterates are ``tol`` apart.

    The iteration uses dense matrix products for speed; :func:`sync_step`
    evaluates the same map block by block.
    """
    _require_pd(spec)
    W = spec.weights.W
    a = spec.alpha
    grad_F = spec.suite.grad_F
    X = np.zeros((spec.n, spec.d)) if x0 is None else check_state(spec, x0).copy()
    for _ in range(max_iter):
        if spec.kind == DGD:
            Xn = W @ X - a * grad_F(X)
        else:
            Xn = W @ (X - a * grad_F(X))
        if block_max_distance(Xn, X) <= tol:
            return Xn
        X = Xn
    raise MaxIterExceeded(f"no fixed point to tol={tol} in {max_iter} iterations")


def lyapunov_oracle(spec, tol=1e-8, x0=None, max_iter=2_000_000):
    """Fixed point as the minimiser of a Lyapunov function, by gradient descent.

    DGD minimises ``F(x) + ||x||^2_{I-W} / (2 alpha)``; DGD-ATC minimises
    ``F(x) + ||x||^2_{W^{-1}-I} / (2 alpha)``.  Stationary points of either
    are exactly the fixed points of the corresponding ``T``.
    """
    _require_pd(spec)
    n, a = spec.n, spec.alpha
    W = spec.weights.W
    if spec.kind == DGD:
        M = np.eye(n) - W
    else:
        M = np.linalg.inv(W) - np.eye(n)
        M = 0.5 * (M + M.T)
    lip = spec.suite.L + np.linalg.eigvalsh(M)[-1] / a
    step = 1.0 / lip
    X = np.zeros((n, spec.d)) if x0 is None else check_state(spec, x0).copy()
    for _ in range(max_iter):
        G = spec.suite.grad_F(X) + (M @ X) / a
        if np.linalg.norm(G) <= tol:
            return X
        X = X - step * G
    raise MaxIterExceeded(f"Lyapunov gradient above {tol} after {max_iter} steps")


def quadratic_fixed_point(spec):
    """Closed-form fixed point for quadratic suites via one linear solve.

    DGD:     ``((I - W) (x) I_d + alpha * blkdiag(A)) x = -alpha * b``
    DGD-ATC: ``((I - W) (x) I_d + alpha * (W (x) I_d) blkdiag(A)) x = -alpha * (W (x) I_d) b``
    """
    suite = spec.suite
    if suite.kind != "quadratic":
        raise TypeError("closed-form fixed point needs a quadratic suite")
    n, d, a = spec.n, spec.d, spec.alpha
    Wb = np.kron(spec.weights.W, np.eye(d))
    A = np.zeros((n * d, n * d))
    for i, f in enumerate(suite):
        A[i * d:(i + 1) * d, i * d:(i + 1) * d] = f.A
    b = np.concatenate([f.b for f in suite])
    lhs = np.eye(n * d) - Wb
    if spec.kind == DGD:
        x = np.linalg.solve(lhs + a * A, -a * b)
    else:
        x = np.linalg.solve(lhs + a * Wb @ A, -a * (Wb @ b))
    return x.reshape(n, d)


@dataclass
class GapReport:
    kind: str
    alpha: float
    beta: float
    L: float
    f_star: float
    sum_inf: float
    C: float
    C1: float  # nan for DGD-ATC
    consensus_bound: float
    objective_bound: float
    measured_consensus: float
    measured_objective_gap: float
    step_condition: bool  # DGD: alpha <= min((1 + lambda_n)/L, 1/Lbar); ATC: W > 0

    # absolute slack for round-off when a bound is exactly zero
    atol = 1e-12

    @property
    def consensus_ok(self):
        return self.measured_consensus <= self.consensus_bound + self.atol

    @property
    def objective_ok(self):
        return self.measured_objective_gap <= self.objective_bound + self.atol

    @property
    def holds(self):
        return self.consensus_ok and self.objective_ok


def consensus_distance(X):
    """``max_i ||x_i - mean(x)||``."""
    X = np.asarray(X, dtype=float)
    return block_max_norm(X - X.mean(axis=0))


def gap_report(spec, x_star, z_star, f_star):
    """Optimality-gap bounds at a fixed point versus measured values.

    ``C = 2 L (f* - sum_i inf f_i)``.  Consensus bound (both algorithms):
    ``alpha sqrt(C) / (1 - beta)``.  Objective bound: DGD
    ``alpha C C1 / (1 - beta)`` with ``C1 = 2 sqrt(2) L ||x* - 1 (x) z*||``;
    DGD-ATC ``alpha C / (1 - beta) + L alpha^2 C / (2 (1 - beta)^2)``.
    """
    suite, W = spec.suite, spec.weights
    X = check_state(spec, x_star)
    z_star = np.asarray(z_star, dtype=float)
    try:
        infs = suite.infs()
    except AttributeError as exc:
        raise MissingInf(str(exc)) from exc
    L, a, beta = suite.L, spec.alpha, W.beta
    sum_inf = float(np.sum(infs))
    # f* - sum inf is nonnegative in exact arithmetic
    C = max(2.0 * L * (f_star - sum_inf), 0.0)
    consensus_bound = a * math.sqrt(C) / (1.0 - beta)
    if spec.kind == DGD:
        C1 = 2.0 * math.sqrt(2.0) * L * float(np.linalg.norm(X - z_star[None, :]))
        objective_bound = a * C * C1 / (1.0 - beta)
        step_ok = a <= min((1.0 + W.lambda_n) / L, 1.0 / suite.Lbar)
    else:
        C1 = float("nan")
        objective_bound = a * C / (1.0 - beta) + L * a * a * C / (2.0 * (1.0 - beta) ** 2)
        step_ok = W.lambda_min > EIG_TOL
    xbar = X.mean(axis=0)
    return GapReport(
        kind=spec.kind, alpha=a, beta=beta, L=L, f_star=float(f_star), sum_inf=sum_inf,
        C=C, C1=C1, consensus_bound=consensus_bound, objective_bound=objective_bound,
        measured_consensus=consensus_distance(X),
        measured_objective_gap=suite.total.value(xbar) - float(f_star),
        step_condition=bool(step_ok),
    )
