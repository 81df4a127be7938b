"""Per-iteration error series and convergence verdicts computed from traces."""

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .operators import GapReport, consensus_distance, contraction_factor

ENVELOPE_RTOL = 1e-9


def training_error(trace, f_star, suite):
    """``f(xbar^k) - f*`` at the node average, for every recorded state."""
    total = suite.total
    return np.array([total.value(X.mean(axis=0)) - f_star for X in trace.states])


def consensus_error(trace):
    """``max_i ||x_i^k - xbar^k||`` for every recorded state."""
    return np.array([consensus_distance(X) for X in trace.states])


@dataclass
class RateReport:
    kind: str
    alpha: float
    rho_theory: float
    B: int
    D: int
    horizon: int
    envelope_violations: int
    max_violation_ratio: float
    initial_distance: float
    final_distance: float
    per_k_distances: np.ndarray = None

    @property
    def ok(self):
        return self.envelope_violations == 0


def envelope(rho, period, d0, K):
    """``rho^floor(k / period) * d0`` for ``k = 0..K``."""
    k = np.arange(K + 1)
    return d0 * rho ** (k // period)


def rate_verdict(trace, spec, x_star, rtol=ENVELOPE_RTOL, atol=0.0):
    """Compare distances to ``x_star`` against the partial-asynchrony envelope.

    The envelope uses the trace's realized ``B`` and ``D`` and the modulus
    from :func:`contraction_factor`.  A violation is any ``k`` with
    ``dist(k) > rho^floor(k/(B+D+1)) * dist(0) * (1 + rtol) + atol``.
    ``atol`` should match the accuracy of ``x_star``: once the envelope
    falls below it, distances are dominated by the reference error.
    """
    rho = contraction_factor(spec)
    B, D = trace.realized_B, trace.realized_D
    dist = trace.distances(x_star)
    env = envelope(rho, B + D + 1, dist[0], trace.horizon)
    bad = dist > env * (1.0 + rtol) + atol
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, dist / env, np.where(dist > 0, np.inf, 0.0))
    return RateReport(
        kind=spec.kind, alpha=spec.alpha, rho_theory=rho, B=int(B), D=int(D),
        horizon=trace.horizon, envelope_violations=int(bad.sum()),
        max_violation_ratio=float(ratio.max()), initial_distance=float(dist[0]),
        final_distance=float(dist[-1]), per_k_distances=dist,
    )


# ---------------------------------------------------------------- CSV output

TRACE_COLUMNS = ("k", "node", "event", "delay_max", "dist_fixed_point",
                 "consensus_err", "objective_gap")


def trace_rows(trace, x_star=None, f_star=None, suite=None):
    """One row per update event, metrics evaluated at the state it produced.

    A leading ``init`` row (``k = -1``, ``node = -1``) describes ``x^0``.
    Empty strings stand for quantities that were not requested.
    """
    def measures(X):
        dist = "" if x_star is None else float(np.max(np.linalg.norm(X - x_star, axis=1)))
        cons = consensus_distance(X)
        gap = "" if f_star is None else suite.total.value(X.mean(axis=0)) - f_star
        return dist, cons, gap

    rows = [dict(zip(TRACE_COLUMNS, (-1, -1, "init", 0, *measures(trace.states[0]))))]
    sched = trace.schedule
    for k, i, s in sched.events():
        dmax = k - min(s) if s else 0
        rows.append(dict(zip(TRACE_COLUMNS, (k, i, "update", dmax, *measures(trace.states[k + 1])))))
    return rows


def write_rows(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r[c]) for c in columns})


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _parse(v):
    if v == "":
        return None
    if v in ("True", "False"):
        return v == "True"
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def read_rows(path):
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in r.items()} for r in csv.DictReader(fh)]


def write_trace_csv(path, trace, x_star=None, f_star=None, suite=None):
    write_rows(path, trace_rows(trace, x_star, f_star, suite), TRACE_COLUMNS)


GAP_COLUMNS = tuple(f.name for f in fields(GapReport))
RATE_COLUMNS = tuple(f.name for f in fields(RateReport) if f.name != "per_k_distances")


def write_gap_csv(path, reports, extra=None):
    extra = extra or [{} for _ in reports]
    keys = tuple(extra[0]) if extra and extra[0] else ()
    rows = [{**e, **asdict(r)} for r, e in zip(reports, extra)]
    write_rows(path, rows, keys + GAP_COLUMNS)


def write_rate_csv(path, reports, extra=None):
    extra = extra or [{} for _ in reports]
    keys = tuple(extra[0]) if extra and extra[0] else ()
    rows = []
    for r, e in zip(reports, extra):
        row = {c: getattr(r, c) for c in RATE_COLUMNS}
        rows.append({**e, **row})
    write_rows(path, rows, keys + RATE_COLUMNS)


def gap_from_row(row):
    return GapReport(**{c: row[c] if row[c] is not None else math.nan for c in GAP_COLUMNS})


def rate_from_row(row):
    return RateReport(**{c: row[c] for c in RATE_COLUMNS})


def summary(gap=None, rate=None):
    """Plain-text bound-versus-measured table."""
    lines = []
    if gap is not None:
        lines.append(f"optimality gap ({gap.kind}, alpha={gap.alpha:.6g}, beta={gap.beta:.6g}, C={gap.C:.6g})")
        lines.append(f"  {'quantity':<18}{'measured':>14}{'bound':>14}  ok")
        lines.append(f"  {'consensus':<18}{gap.measured_consensus:>14.6g}{gap.consensus_bound:>14.6g}  {gap.consensus_ok}")
        lines.append(f"  {'objective':<18}{gap.measured_objective_gap:>14.6g}{gap.objective_bound:>14.6g}  {gap.objective_ok}")
    if rate is not None:
        lines.append(f"rate envelope ({rate.kind}, rho={rate.rho_theory:.6g}, B={rate.B}, D={rate.D}, K={rate.horizon})")
        lines.append(f"  violations={rate.envelope_violations}  max dist/envelope={rate.max_violation_ratio:.6g}"
                     f"  final dist={rate.final_distance:.3g}")
    return "\n".join(lines)
