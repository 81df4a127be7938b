"""Deterministic simulator for the asynchronous iterations, plus replay.

For node ``i`` and iteration ``k``::

    k not in K_i:   x_i^{k+1} = x_i^k
    DGD:            x_i^{k+1} = sum_j w_ij x_j^{s_ij^k} - alpha grad f_i(x_i^k)
    DGD-ATC:        x_i^{k+1} = sum_j w_ij y_j^{s_ij^k},  y_j^s = x_j^s - alpha grad f_j(x_j^s)

The ATC messages ``y_j`` are computed once, when ``j`` updates, and then
reused for every later read, mirroring what a node would broadcast.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CorruptTrace, ScheduleSpecMismatch
from .operators import ATC, DGD, adapt, block_max_distance, check_state, combine
from .schedule import Schedule


@dataclass
class Trace:
    states: np.ndarray  # (K + 1, n, d)
    schedule: Schedule
    kind: str
    alpha: float
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return self.states.shape[0] - 1

    @property
    def realized_B(self):
        return self.schedule.realized_B

    @property
    def realized_D(self):
        return self.schedule.realized_D

    @property
    def final(self):
        return self.states[-1]

    def distances(self, x_star):
        return np.array([block_max_distance(X, x_star) for X in self.states])

    def check_hold(self):
        """True iff every iteration changes only the blocks of active nodes."""
        for k in range(self.horizon):
            idle = np.setdiff1d(np.arange(self.states.shape[1]), self.schedule.active[k])
            if not np.array_equal(self.states[k + 1][idle], self.states[k][idle]):
                return False
        return True


def _check(spec, sched):
    if sched.n != spec.n or tuple(sched.neighbors) != tuple(spec.weights.graph.neighbors):
        raise ScheduleSpecMismatch("schedule and spec describe different graphs")


def simulate(spec, sched, x0):
    """Run the indexed asynchronous recursion and return the state array."""
    _check(spec, sched)
    X0 = check_state(spec, x0)
    n, K = spec.n, sched.horizon
    grads = [spec.suite[i].grad for i in range(n)]
    a = spec.alpha
    states = np.empty((K + 1, n, spec.d))
    states[0] = X0
    if spec.kind == ATC:
        ys = np.empty_like(states)
        ys[0] = np.stack([adapt(spec, j, X0[j]) for j in range(n)])
    for k in range(K):
        cur = states[k]
        nxt = states[k + 1]
        nxt[:] = cur
        row = sched.delays[k]
        for i in sched.active[k]:
            nb = spec.closed_neighborhood(i)
            s_it = iter(row[i])
            idx = [k if j == i else next(s_it) for j in nb]
            if spec.kind == DGD:
                nxt[i] = combine(spec, i, [states[s][j] for s, j in zip(idx, nb)]) - a * grads[i](cur[i])
            else:
                nxt[i] = combine(spec, i, [ys[s][j] for s, j in zip(idx, nb)])
        if spec.kind == ATC:
            ys[k + 1] = ys[k]
            for i in sched.active[k]:
                ys[k + 1][i] = adapt(spec, i, nxt[i])
    return states


def run_async(spec, sched, x0=None):
    """Simulate ``spec`` under ``sched`` from ``x0`` (zeros by default)."""
    if x0 is None:
        x0 = np.zeros((spec.n, spec.d))
    states = simulate(spec, sched, x0)
    return Trace(states=states, schedule=sched, kind=spec.kind, alpha=spec.alpha,
                 meta={"source": "sim", "mode": sched.mode})


def replay(trace, spec):
    """Re-execute the logged schedule from ``trace.states[0]``.

    Returns True iff every recorded state is reproduced bit for bit.
    """
    st = trace.states
    sched = trace.schedule
    if st.ndim != 3 or st.shape[0] != sched.horizon + 1 or st.shape[1:] != (spec.n, spec.d):
        raise CorruptTrace(f"state array {st.shape} inconsistent with horizon {sched.horizon}")
    if trace.kind != spec.kind:
        raise CorruptTrace(f"trace was produced by {trace.kind}, spec is {spec.kind}")
    try:
        again = simulate(spec, sched, st[0])
    except (KeyError, IndexError, StopIteration) as exc:
        raise CorruptTrace(f"event log unusable: {exc!r}") from exc
    return bool(np.array_equal(again, st))
