"""Convergence checks run by ``asyncdgd verify``.

Each check returns a :class:`Check`; :func:`run_checks` stops at nothing and
reports every outcome, the CLI names the first failure.
"""

from dataclasses import dataclass

import numpy as np

from .engine import run_async
from .exceptions import AsyncDGDError
from .metrics import rate_verdict
from .objectives import centralized_solve
from .operators import (
    block_max_distance,
    contraction_factor,
    gap_report,
    lyapunov_oracle,
    operator_T,
    quadratic_fixed_point,
    solve_fixed_point,
)
from .schedule import TOTAL, make_schedule


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def pseudo_contraction_violations(spec, x_star, rho, samples, seed, slack=1e-9):
    """Count random points where ``||T(x) - x*|| > rho ||x - x*|| + slack`` (block-max)."""
    rng = np.random.default_rng(seed)
    bad = 0
    worst = 0.0
    for _ in range(samples):
        scale = 10.0 ** rng.uniform(-3, 1)
        X = x_star + scale * rng.standard_normal(x_star.shape)
        lhs = block_max_distance(operator_T(spec, X), x_star)
        rhs = rho * block_max_distance(X, x_star)
        worst = max(worst, lhs / rhs if rhs > 0 else 0.0)
        if lhs > rhs + slack:
            bad += 1
    return bad, worst


def run_checks(exp, schedule=None):
    cfg = exp.cfg
    tol = cfg["tolerances"]
    spec = exp.spec
    out = []

    def record(name, fn):
        try:
            passed, detail = fn()
        except AsyncDGDError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        except FloatingPointError as exc:
            passed, detail = False, f"overflow: {exc}"
        out.append(Check(name, bool(passed), detail))
        return passed

    state = {}

    def c_rho():
        state["rho"] = contraction_factor(spec)
        return True, f"rho={state['rho']:.6g}"

    def c_fixed_point():
        x = solve_fixed_point(spec, x0=exp.x0, tol=tol["fixed_point"])
        state["x_star"] = x
        res = block_max_distance(operator_T(spec, x), x)
        return res <= 10 * tol["fixed_point"] + 1e-14, f"residual={res:.3g}"

    def c_oracles():
        x = state["x_star"]
        # a gradient norm g certifies distance g / mu, so tighten to reach the agreement target
        grad_tol = min(tol["lyapunov"], 0.1 * tol["oracle_agreement"] * float(np.min(exp.suite.mus)))
        ly = lyapunov_oracle(spec, tol=grad_tol)
        pairs = {"fixed_point~lyapunov": block_max_distance(x, ly)}
        if exp.suite.kind == "quadratic":
            lin = quadratic_fixed_point(spec)
            pairs["fixed_point~linear"] = block_max_distance(x, lin)
            pairs["lyapunov~linear"] = block_max_distance(ly, lin)
        worst = max(pairs.values())
        return worst <= tol["oracle_agreement"], ", ".join(f"{k}={v:.2g}" for k, v in pairs.items())

    def c_pseudo():
        bad, worst = pseudo_contraction_violations(
            spec, state["x_star"], state["rho"], cfg["verify"]["contraction_samples"],
            seed=exp.seed, slack=tol["contraction_slack"])
        return bad == 0, f"violations={bad}, max ratio/rho={worst:.6g}"

    def c_envelope():
        sched = schedule
        if sched is None:
            s = cfg["schedule"]
            sched = make_schedule(s["mode"], exp.graph, int(cfg["horizon"]), seed=exp.seed,
                                  B=s.get("B"), D=s.get("D"), growth=s.get("growth", "sqrt"),
                                  p_active=s.get("p_active", 0.5))
        with np.errstate(over="raise", invalid="raise"):
            trace = run_async(spec, sched, exp.x0)
        state["trace"] = trace
        rep = rate_verdict(trace, spec, state["x_star"], rtol=tol["envelope_rtol"],
                           atol=tol["envelope_atol"])
        detail = f"B={rep.B}, D={rep.D}, violations={rep.envelope_violations}"
        ok = rep.ok
        if sched.mode == TOTAL:
            dist = rep.per_k_distances
            K = trace.horizon
            ok = ok and dist[K] < dist[K // 10]
            detail += f", dist(K)={dist[K]:.3g}, dist(K/10)={dist[K // 10]:.3g}"
        return ok, detail

    def c_gap():
        z, f = centralized_solve(exp.suite.total, tol=tol["centralized"])
        rep = gap_report(spec, state["x_star"], z, f)
        state["gap"] = rep
        return rep.holds, (f"consensus {rep.measured_consensus:.3g} <= {rep.consensus_bound:.3g}, "
                           f"objective {rep.measured_objective_gap:.3g} <= {rep.objective_bound:.3g}")

    if not record("contraction_factor", c_rho):
        return out
    if not record("fixed_point", c_fixed_point):
        return out
    record("oracle_agreement", c_oracles)
    record("pseudo_contraction", c_pseudo)
    record("rate_envelope", c_envelope)
    record("gap_bounds", c_gap)
    return out


def format_checks(checks):
    width = max((len(c.name) for c in checks), default=4)
    lines = [f"{'check':<{width}}  result  detail"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL':<6}  {c.detail}")
    return "\n".join(lines)
