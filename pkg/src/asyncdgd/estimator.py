"""scikit-learn classifier backed by the asynchronous decentralized solvers.

The training rows are split across ``n_nodes`` simulated agents, each agent
holds the regularized logistic loss of its shard, and the asynchronous
iteration is run for ``horizon`` global steps.  The fitted coefficients are
the node average of the final state.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data
from scipy.special import expit

from . import topology as topo
from .engine import run_async
from .objectives import Dataset, logistic_suite, normalize_labels, partition_dataset
from .operators import ATC, AlgorithmSpec, default_step_size, normalize_kind
from .schedule import make_schedule


class AsyncDecentralizedLogisticRegression(ClassifierMixin, BaseEstimator):
    """Logistic regression trained by asynchronous DGD or DGD-ATC.

    More than two classes are handled one-vs-rest, one decentralized run per
    class on the same graph, partition and schedule.

    Parameters
    ----------
    n_nodes : int, default=8
        Number of simulated agents; each receives a random shard of the rows.
    graph : {"ring", "path", "complete"}, default="ring"
        Communication topology between agents.
    algorithm : {"dgd", "atc"}, default="atc"
        Update rule.  ``"atc"`` adapts locally before combining.
    lam : float, default=1e-3
        L2 regularization weight of the global objective.
    schedule : {"sync", "partial", "total"}, default="partial"
        Asynchrony model driving the simulator.
    B, D : int, default=2
        Update-interval and delay bounds for ``schedule="partial"``.
    horizon : int, default=2000
        Number of global iterations.
    alpha : float or None, default=None
        Step size.  ``None`` uses the default admissible step for the algorithm.
    fit_intercept : bool, default=True
        Append a constant feature whose coefficient becomes ``intercept_``.
    seed : int, default=0
        Seed for the data partition and the schedule.

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
    coef_ : ndarray of shape (n_problems, n_features)
        ``n_problems`` is 1 for binary targets and ``n_classes`` otherwise.
    intercept_ : ndarray of shape (n_problems,)
    node_coefs_ : ndarray of shape (n_problems, n_nodes, n_features + fit_intercept)
        Final per-agent iterates.
    alpha_ : float
        Step size actually used.  The curvature constants depend only on
        the features, so every one-vs-rest problem shares it.
    traces_ : list of Trace
        Full state history of every run.
    """

    def __init__(self, n_nodes=8, graph="ring", algorithm="atc", lam=1e-3, schedule="partial",
                 B=2, D=2, horizon=2000, alpha=None, fit_intercept=True, seed=0):
        self.n_nodes = n_nodes
        self.graph = graph
        self.algorithm = algorithm
        self.lam = lam
        self.schedule = schedule
        self.B = B
        self.D = D
        self.horizon = horizon
        self.alpha = alpha
        self.fit_intercept = fit_intercept
        self.seed = seed

    _GRAPHS = {"ring": topo.ring, "path": topo.path, "complete": topo.complete}

    def _augment(self, X):
        if self.fit_intercept:
            return np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def _fit_binary(self, ds, g, kind, weights, seed):
        n = int(self.n_nodes)
        suite = logistic_suite(partition_dataset(ds, n, seed), float(self.lam), ds.N)
        alpha = default_step_size(kind, weights, suite) if self.alpha is None else float(self.alpha)
        spec = AlgorithmSpec(kind, alpha, weights, suite)
        sched = make_schedule(self.schedule, g, int(self.horizon), seed=seed, B=self.B, D=self.D)
        return run_async(spec, sched, np.zeros((n, ds.d))), alpha

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            k = self.classes_.size
            raise ValueError(f"at least two classes are required; y has {k} class{'es' if k != 1 else ''}")
        n = int(self.n_nodes)
        if n < 1 or X.shape[0] < n:
            raise ValueError(f"need 1 <= n_nodes <= n_samples, got n_nodes={n}, n_samples={X.shape[0]}")
        if self.lam <= 0:
            raise ValueError("lam must be positive for a strongly convex objective")

        Xa = self._augment(X)
        g = topo.build_graph(1, []) if n == 1 else self._GRAPHS[self.graph](n)
        kind = normalize_kind(self.algorithm)
        weights = topo.metropolis_weights(g)
        if kind == ATC:
            weights = topo.ensure_positive_definite(weights)

        # one-vs-rest; a binary problem needs only the second class as positive
        positives = self.classes_[1:] if self.classes_.size == 2 else self.classes_
        self.traces_, coefs, nodes = [], [], []
        for c in positives:
            ds = Dataset(Xa, normalize_labels(y, positive=c))
            trace, self.alpha_ = self._fit_binary(ds, g, kind, weights, self.seed)
            self.traces_.append(trace)
            nodes.append(trace.final.copy())
            coefs.append(trace.final.mean(axis=0))
        self.node_coefs_ = np.stack(nodes)
        W = np.stack(coefs)
        if self.fit_intercept:
            self.coef_, self.intercept_ = W[:, :-1], W[:, -1]
        else:
            self.coef_, self.intercept_ = W, np.zeros(W.shape[0])
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        scores = X @ self.coef_.T + self.intercept_
        return scores[:, 0] if self.classes_.size == 2 else scores

    def predict_proba(self, X):
        scores = self.decision_function(X)
        if self.classes_.size == 2:
            p = expit(scores)
            return np.column_stack([1.0 - p, p])
        p = expit(scores)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        scores = self.decision_function(X)
        if self.classes_.size == 2:
            return self.classes_[(scores > 0).astype(int)]
        return self.classes_[np.argmax(scores, axis=1)]
