"""Activation sets and information delays for the asynchronous iterations.

A :class:`Schedule` lists, for every iteration ``k < horizon``, the nodes
that update and, for each updating node ``i``, the iteration index
``s_ij^k`` of the copy of every neighbour ``j`` it reads.  The node's own
block is always current (``s_ii^k = k``) and is not stored.

Text format (also used as the replay log of a trace)::

    # asyncdgd-schedule v1
    # n=8 horizon=500 mode=partial B=2 D=2 seed=7
    k i s_i1 ... s_im

with one line per ``(k, i)`` update and the ``s`` values ordered like the
sorted neighbour list of ``i``.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InfeasibleWindow, ScheduleSpecMismatch, ValidationFailed

SYNC = "sync"
PARTIAL = "partial"
TOTAL = "total"
LIVE = "live"

GROWTH = {
    "sqrt": lambda k: math.isqrt(k - 1) + 1 if k > 0 else 0,  # ceil(sqrt(k))
    "log": lambda k: math.ceil(math.log2(k + 1)),
}


@dataclass
class Schedule:
    n: int
    horizon: int
    neighbors: tuple
    active: list  # active[k] -> sorted tuple of node ids
    delays: list  # delays[k] -> {i: tuple of s_ij aligned with neighbors[i]}
    mode: str = SYNC
    params: dict = field(default_factory=dict)
    seed: int = 0

    def activations(self, i):
        return [k for k in range(self.horizon) if i in self.delays[k]]

    def delay_of(self, k, i, j):
        if j == i:
            return k
        return self.delays[k][i][self.neighbors[i].index(j)]

    @property
    def realized_B(self):
        """Smallest ``B`` such that every window ``{k..k+B}`` inside the horizon
        contains an update of every node."""
        B = 0
        for i in range(self.n):
            acts = self.activations(i)
            if not acts:
                return self.horizon
            gaps = [acts[0]] + [b - a - 1 for a, b in zip(acts, acts[1:])]
            gaps.append(self.horizon - 1 - acts[-1])
            B = max(B, max(gaps))
        return B

    @property
    def realized_D(self):
        D = 0
        for k, row in enumerate(self.delays):
            for s in row.values():
                if s:
                    D = max(D, k - min(s))
        return D

    def events(self):
        """Yield ``(k, i, s_tuple)`` in iteration order."""
        for k in range(self.horizon):
            for i in self.active[k]:
                yield k, i, self.delays[k][i]

    def check_graph(self, graph):
        if graph.n != self.n or tuple(graph.neighbors) != tuple(self.neighbors):
            raise ScheduleSpecMismatch("schedule was built for a different graph")


def _empty(n, horizon, neighbors, mode, params, seed):
    return Schedule(n=n, horizon=horizon, neighbors=tuple(neighbors), active=[], delays=[],
                    mode=mode, params=dict(params), seed=seed)


def make_schedule(mode, graph, horizon, seed=0, B=None, D=None, growth="sqrt", p_active=0.5):
    """Build and validate a schedule.

    ``sync``: all nodes update every iteration with fresh data.
    ``partial``: random activations (probability ``p_active``) forced so every
    window of ``B + 1`` iterations holds an update of every node; delays
    uniform on ``[max(0, k - D), k]``.
    ``total``: delays ``min(k, g(k))`` with ``g`` the ``growth`` function
    (``ceil(sqrt(k))`` by default) and per-node activation gaps drawn
    uniformly from ``[1, ceil(log2(k + 2))]``.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise InfeasibleWindow("horizon must be at least 1")
    n, nbrs = graph.n, graph.neighbors
    rng = np.random.default_rng(seed)

    if mode == SYNC:
        sched = _empty(n, horizon, nbrs, SYNC, {}, seed)
        everyone = tuple(range(n))
        for k in range(horizon):
            sched.active.append(everyone)
            sched.delays.append({i: (k,) * len(nbrs[i]) for i in everyone})

    elif mode == PARTIAL:
        B, D = int(B), int(D)
        if B < 0 or D < 0:
            raise InfeasibleWindow("B and D must be nonnegative")
        if B + 1 > horizon:
            raise InfeasibleWindow(f"window length B+1={B + 1} exceeds horizon {horizon}")
        sched = _empty(n, horizon, nbrs, PARTIAL, {"B": B, "D": D, "p_active": p_active}, seed)
        last = [-1] * n
        for k in range(horizon):
            act = []
            for i in range(n):
                forced = last[i] < k - B
                if forced or rng.random() < p_active:
                    act.append(i)
                    last[i] = k
            row = {}
            for i in act:
                lo = max(0, k - D)
                row[i] = tuple(int(s) for s in rng.integers(lo, k + 1, size=len(nbrs[i])))
            sched.active.append(tuple(act))
            sched.delays.append(row)

    elif mode == TOTAL:
        g = GROWTH[growth] if isinstance(growth, str) else growth
        sched = _empty(n, horizon, nbrs, TOTAL,
                       {"growth": growth if isinstance(growth, str) else "custom"}, seed)
        nxt = [int(rng.integers(0, 2)) for _ in range(n)]
        for k in range(horizon):
            act = tuple(i for i in range(n) if nxt[i] == k)
            s = k - min(k, int(g(k)))
            row = {i: (s,) * len(nbrs[i]) for i in act}
            for i in act:
                cap = max(1, math.ceil(math.log2(k + 2)))
                nxt[i] = k + int(rng.integers(1, cap + 1))
            sched.active.append(act)
            sched.delays.append(row)
    else:
        raise ValueError(f"unknown schedule mode {mode!r}")

    validate_schedule(sched)
    return sched


def validate_schedule(sched):
    """Check structural and mode-specific invariants; raise :class:`ValidationFailed`."""
    if len(sched.active) != sched.horizon or len(sched.delays) != sched.horizon:
        raise ValidationFailed("active/delays length differs from horizon")
    for k in range(sched.horizon):
        if tuple(sorted(sched.delays[k])) != tuple(sched.active[k]):
            raise ValidationFailed(f"k={k}: delay map keys differ from active set")
        for i, s in sched.delays[k].items():
            if not 0 <= i < sched.n:
                raise ValidationFailed(f"k={k}: node {i} out of range")
            if len(s) != len(sched.neighbors[i]):
                raise ValidationFailed(f"k={k}, i={i}: {len(s)} delays for {len(sched.neighbors[i])} neighbours")
            if any(not 0 <= v <= k for v in s):
                raise ValidationFailed(f"k={k}, i={i}: delay index outside [0, k]")

    if sched.mode == PARTIAL:
        B, D = sched.params["B"], sched.params["D"]
        if sched.realized_B > B:
            raise ValidationFailed(f"update window violated: realized B={sched.realized_B} > {B}")
        if sched.realized_D > D:
            raise ValidationFailed(f"delay bound violated: realized D={sched.realized_D} > {D}")
    elif sched.mode == SYNC:
        if sched.realized_B != 0 or sched.realized_D != 0:
            raise ValidationFailed("synchronous schedule has delays or idle nodes")
    elif sched.mode == TOTAL:
        for i in range(sched.n):
            acts = sched.activations(i)
            if not acts:
                raise ValidationFailed(f"node {i} never updates")
            for m in range(len(sched.neighbors[i])):
                seq = [sched.delays[k][i][m] for k in acts]
                if any(b < a for a, b in zip(seq, seq[1:])):
                    raise ValidationFailed(f"node {i}: delays not nondecreasing")
    return True


def write_schedule(sched, path):
    lines = ["# asyncdgd-schedule v1"]
    meta = " ".join(f"{k}={v}" for k, v in sched.params.items())
    lines.append(f"# n={sched.n} horizon={sched.horizon} mode={sched.mode} seed={sched.seed} {meta}".rstrip())
    for k, i, s in sched.events():
        lines.append(" ".join(str(v) for v in (k, i, *s)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_schedule(path, graph):
    """Parse the text format back into a :class:`Schedule` for ``graph``."""
    header = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    header[key] = val
            continue
        vals = [int(v) for v in line.split()]
        rows.append((vals[0], vals[1], tuple(vals[2:])))
    n = int(header.get("n", graph.n))
    horizon = int(header.get("horizon", 1 + max((r[0] for r in rows), default=-1)))
    if n != graph.n:
        raise ScheduleSpecMismatch(f"schedule for n={n}, graph has n={graph.n}")
    params = {k: _parse_scalar(v) for k, v in header.items() if k not in ("n", "horizon", "mode", "seed")}
    sched = _empty(n, horizon, graph.neighbors, header.get("mode", LIVE), params,
                   int(header.get("seed", 0)))
    sched.active = [() for _ in range(horizon)]
    sched.delays = [{} for _ in range(horizon)]
    for k, i, s in rows:
        sched.delays[k][i] = s
    for k in range(horizon):
        sched.active[k] = tuple(sorted(sched.delays[k]))
    return sched


def _parse_scalar(v):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v
