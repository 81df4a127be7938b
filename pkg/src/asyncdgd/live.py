"""Message-passing runtime: one thread per node, buffered inboxes.

Each worker holds its own iterate and, per neighbour, a channel carrying that
neighbour's broadcasts.  A worker wakes once any channel holds a deliverable
message (on its first activation it waits until every neighbour has spoken),
keeps only the newest message per neighbour, updates, reports the update to
the collector and then broadcasts.  Reporting before broadcasting means the
collector's FIFO queue always sees a producer's update before any update that
consumed it, so arrival order is a valid global iteration order.

The collector turns the event stream into an ordinary :class:`Trace` whose
schedule records, for every update, which version of each neighbour was read.
:func:`asyncdgd.engine.replay` can therefore re-derive every live state.
"""

import queue
import threading
import time
import traceback
from collections import deque

import numpy as np

from .engine import Trace
from .exceptions import Timeout, WorkerPanic
from .operators import ATC, DGD, adapt, block_max_distance, check_state, combine
from .schedule import LIVE, Schedule, validate_schedule


class _Inbox:
    """Per-node buffer: one FIFO channel per in-neighbour."""

    def __init__(self, senders):
        self.cond = threading.Condition()
        self.channels = {j: deque() for j in senders}

    def put(self, sender, deliver_at, version, payload):
        with self.cond:
            self.channels[sender].append((deliver_at, version, payload))
            self.cond.notify()

    def take(self, require_all, stop, poll=0.005):
        """Block until a message is deliverable; return ``{j: (version, payload)}``.

        Only the newest deliverable message per channel is returned; older ones
        are dropped.  Returns None once ``stop`` is set.
        """
        if not self.channels:
            return None if stop.is_set() else {}
        with self.cond:
            while not stop.is_set():
                now = time.monotonic()
                ready = {}
                wake = None
                for j, ch in self.channels.items():
                    newest = None
                    while ch and ch[0][0] <= now:
                        newest = ch.popleft()
                    if newest is not None:
                        ready[j] = newest[1:]
                    if ch:
                        wake = ch[0][0] if wake is None else min(wake, ch[0][0])
                if ready and (not require_all or len(ready) == len(self.channels)):
                    return ready
                if ready:
                    # first activation: hold the partial set until the rest arrive
                    for j, msg in ready.items():
                        self.channels[j].appendleft((now, *msg))
                timeout = poll if wake is None else max(0.0, min(poll, wake - now))
                self.cond.wait(timeout)
            return None


def run_live(spec, x0=None, x_star=None, target_tol=None, duration=10.0,
             edge_delays=None, compute_delay=None, max_events=2_000_000):
    """Run the asynchronous algorithm on real threads and record a trace.

    Parameters
    ----------
    spec : AlgorithmSpec
    x0 : array (n, d), optional
        Initial iterate, zeros by default.
    x_star : array (n, d), optional
        Reference fixed point for the ``target_tol`` stopping rule.
    target_tol : float, optional
        Stop as soon as the block-max distance to ``x_star`` is at most this.
        If it is not reached within ``duration`` seconds, :class:`Timeout` is
        raised with the partial trace attached as ``exc.trace``.
    duration : float
        Wall-clock budget in seconds.
    edge_delays : dict, optional
        ``{(src, dst): seconds}`` extra latency on directed links.
    compute_delay : dict, optional
        ``{node: seconds}`` sleep before each local update.
    """
    n, d = spec.n, spec.d
    X0 = np.zeros((n, d)) if x0 is None else check_state(spec, x0).copy()
    if target_tol is not None and x_star is None:
        raise ValueError("target_tol needs x_star")
    nbrs = spec.weights.graph.neighbors
    edge_delays = dict(edge_delays or {})
    compute_delay = dict(compute_delay or {})
    inboxes = [_Inbox(nbrs[i]) for i in range(n)]
    events = queue.SimpleQueue()
    stop = threading.Event()
    a = spec.alpha

    def send(src, version, payload):
        now = time.monotonic()
        for dst in nbrs[src]:
            lag = edge_delays.get((src, dst), 0.0)
            inboxes[dst].put(src, now + lag, version, payload)

    def worker(i):
        try:
            x = X0[i].copy()
            y = adapt(spec, i, x) if spec.kind == ATC else None
            count = 0
            held = {}
            send(i, 0, y if spec.kind == ATC else x)
            nb = spec.closed_neighborhood(i)
            grad = spec.suite[i].grad
            while not stop.is_set():
                msgs = inboxes[i].take(require_all=(count == 0), stop=stop)
                if msgs is None:
                    break
                held.update(msgs)
                lag = compute_delay.get(i, 0.0)
                if lag:
                    time.sleep(lag)
                used = tuple(held[j][0] for j in nbrs[i])
                if spec.kind == DGD:
                    vals = [x if j == i else held[j][1] for j in nb]
                    x = combine(spec, i, vals) - a * grad(x)
                    payload = x
                else:
                    vals = [y if j == i else held[j][1] for j in nb]
                    x = combine(spec, i, vals)
                    y = adapt(spec, i, x)
                    payload = y
                count += 1
                events.put(("update", i, count, used, x))
                send(i, count, payload)
        except Exception:
            events.put(("panic", i, traceback.format_exc()))

    threads = [threading.Thread(target=worker, args=(i,), name=f"node-{i}", daemon=True)
               for i in range(n)]

    # collector state
    version_k = [dict() for _ in range(n)]  # node -> {local count: global k}
    cur = X0.copy()
    states = [X0.copy()]
    active, delays = [], []
    reached = target_tol is not None and block_max_distance(cur, x_star) <= target_tol
    panic = None
    t0 = time.monotonic()
    for t in threads:
        t.start()
    try:
        while not reached and len(active) < max_events:
            remaining = duration - (time.monotonic() - t0)
            if remaining <= 0:
                break
            try:
                ev = events.get(timeout=min(remaining, 0.1))
            except queue.Empty:
                continue
            if ev[0] == "panic":
                panic = ev
                break
            _, i, count, used, x_new = ev
            k = len(active)
            s = tuple(0 if c == 0 else version_k[j][c] + 1 for j, c in zip(nbrs[i], used))
            version_k[i][count] = k
            cur = cur.copy()
            cur[i] = x_new
            states.append(cur)
            active.append((i,))
            delays.append({i: s})
            if target_tol is not None:
                reached = block_max_distance(cur, x_star) <= target_tol
    finally:
        stop.set()
        for box in inboxes:
            with box.cond:
                box.cond.notify_all()
        for t in threads:
            t.join(timeout=5.0)
    elapsed = time.monotonic() - t0
    if panic is not None:
        raise WorkerPanic(f"node {panic[1]} failed:\n{panic[2]}")

    sched = Schedule(n=n, horizon=len(active), neighbors=tuple(nbrs), active=active,
                     delays=delays, mode=LIVE,
                     params={"edge_delays": len(edge_delays)}, seed=0)
    validate_schedule(sched)
    trace = Trace(states=np.stack(states), schedule=sched, kind=spec.kind, alpha=a,
                  meta={"source": "live", "mode": LIVE, "elapsed": elapsed,
                        "reached": bool(reached)})
    if target_tol is not None and not reached:
        exc = Timeout(f"distance {block_max_distance(cur, x_star):.3g} > {target_tol} "
                      f"after {elapsed:.1f}s and {len(active)} updates")
        exc.trace = trace
        raise exc
    return trace
