"""Command line entry point: ``asyncdgd {run,verify,sweep,replay}``."""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import format_checks, run_checks
from .config import build_experiment, load_config, public_config, sub_seed
from .engine import run_async
from .exceptions import AsyncDGDError, ConfigError
from .live import run_live
from .metrics import (
    consensus_error,
    rate_verdict,
    read_rows,
    summary,
    trace_rows,
    training_error,
    write_gap_csv,
    write_rate_csv,
    write_rows,
    write_trace_csv,
)
from .objectives import centralized_solve
from .operators import contraction_factor, gap_report, max_step_size, solve_fixed_point
from .schedule import make_schedule, read_schedule, write_schedule

log = logging.getLogger("asyncdgd")

TRACE_FILE = "trace.csv"
GAP_FILE = "gap.csv"
RATE_FILE = "rate.csv"
MANIFEST_FILE = "manifest.json"
REPLAY_FILE = "replay.log"


def _schedule_for(exp, cfg):
    s = cfg["schedule"]
    return make_schedule(s["mode"], exp.graph, int(cfg["horizon"]),
                         seed=sub_seed(cfg["seed"], "schedule"), B=s.get("B"), D=s.get("D"),
                         growth=s.get("growth", "sqrt"), p_active=s.get("p_active", 0.5))


def _reference(exp):
    """Fixed point and centralised optimum, or ``(None, None, None, reason)``."""
    tol = exp.cfg["tolerances"]
    try:
        x_star = solve_fixed_point(exp.spec, x0=exp.x0, tol=tol["fixed_point"], max_iter=200_000)
        z, f = centralized_solve(exp.suite.total, tol=tol["centralized"])
    except (AsyncDGDError, FloatingPointError) as exc:
        return None, None, None, type(exc).__name__
    if not np.all(np.isfinite(x_star)):
        return None, None, None, "diverged"
    return x_star, z, f, "ok"


def _execute(exp, cfg, mode):
    """Run the simulator or live runtime; return ``(trace, x_star, z, f, status)``."""
    x_star, z, f, status = _reference(exp)
    if mode == "live":
        lv = cfg["live"]
        delays = {(int(a), int(b)): float(t) for a, b, t in lv.get("edge_delays", [])}
        comp = {int(k): float(v) for k, v in lv.get("compute_delays", {}).items()}
        target = lv.get("target_tol")
        trace = run_live(exp.spec, x0=exp.x0, x_star=x_star,
                         target_tol=target if x_star is not None else None,
                         duration=float(lv.get("duration", 20.0)), edge_delays=delays,
                         compute_delay=comp)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            trace = run_async(exp.spec, _schedule_for(exp, cfg), exp.x0)
    return trace, x_star, z, f, status


def _manifest(exp, trace, x_star, f_star, status, files):
    spec, suite, w = exp.spec, exp.suite, exp.weights
    try:
        rho = contraction_factor(spec)
    except AsyncDGDError:
        rho = None
    try:
        infs = suite.infs().tolist()
    except AsyncDGDError:
        infs = None
    return {
        "version": __version__,
        "config": public_config(exp.cfg),
        "resolved": {
            "n": spec.n, "d": spec.d, "kind": spec.kind, "alpha": spec.alpha,
            "alpha_max": max_step_size(spec.kind, w, suite) if spec.weights.self_weights.min() > 0 else None,
            "unsafe": spec.unsafe,
            "L_i": suite.Ls.tolist(), "mu_i": suite.mus.tolist(), "inf_i": infs,
            "L": suite.L, "Lbar": suite.Lbar,
            "beta": w.beta, "lambda_min": w.lambda_min, "lambda_2": w.lambda_2,
            "W": w.W.tolist(), "edges": [list(e) for e in exp.graph.edges],
            "rho": rho, "f_star": f_star, "reference_status": status,
            "x0": exp.x0.tolist(),
            "x_star": None if x_star is None else x_star.tolist(),
            "sub_seeds": {k: sub_seed(exp.cfg["seed"], k)
                          for k in ("graph", "objective", "dataset", "partition", "schedule", "init")},
        },
        "trace": {"source": trace.meta.get("source"), "mode": trace.schedule.mode,
                  "horizon": trace.horizon, "realized_B": trace.realized_B,
                  "realized_D": trace.realized_D},
        "files": files,
    }


def cmd_run(cfg, out, mode="sim"):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    exp = build_experiment(cfg)
    trace, x_star, z, f, status = _execute(exp, cfg, mode)

    write_trace_csv(out / TRACE_FILE, trace, x_star, f, exp.suite if f is not None else None)
    write_schedule(trace.schedule, out / REPLAY_FILE)
    tag = {"status": status}
    if x_star is not None:
        gap = gap_report(exp.spec, x_star, z, f)
        write_gap_csv(out / GAP_FILE, [gap], [tag])
        try:
            rate = rate_verdict(trace, exp.spec, x_star, rtol=cfg["tolerances"]["envelope_rtol"],
                                 atol=cfg["tolerances"]["envelope_atol"])
            write_rate_csv(out / RATE_FILE, [rate], [tag])
        except AsyncDGDError as exc:
            rate = None
            write_rows(out / RATE_FILE, [{"status": type(exc).__name__}], ["status"])
        print(summary(gap, rate))
    else:
        write_rows(out / GAP_FILE, [tag], ["status"])
        write_rows(out / RATE_FILE, [tag], ["status"])
        print(f"no fixed point available ({status}); wrote trace only")
    files = [TRACE_FILE, GAP_FILE, RATE_FILE, MANIFEST_FILE, REPLAY_FILE]
    man = _manifest(exp, trace, x_star, f, status, files)
    (out / MANIFEST_FILE).write_text(json.dumps(man, indent=2) + "\n")
    log.info("wrote %s", ", ".join(str(out / p) for p in files))
    return 0


def cmd_verify(cfg):
    try:
        exp = build_experiment(cfg)
    except ConfigError:
        raise
    except AsyncDGDError as exc:
        print(f"FAIL construction: {type(exc).__name__}: {exc}")
        return 1
    checks = run_checks(exp, schedule=_schedule_for(exp, cfg))
    print(format_checks(checks))
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"first failing check: {failed[0].name}")
        return 1
    return 0


SWEEP_AXES = ("alpha", "D", "B", "n")
SWEEP_COLUMNS = ("axis", "value", "kind", "alpha", "rho", "B", "D", "horizon", "final_distance",
                 "final_training_error", "final_consensus_error", "envelope_violations", "status")


def cmd_sweep(cfg, axis, values, out, relative=False):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for v in values:
        if axis == "alpha":
            alpha = {"policy": "fraction" if relative else "value", "value": float(v)}
            run_cfg = {**cfg, "alpha": {**cfg["alpha"], **alpha}}
        elif axis in ("B", "D"):
            run_cfg = {**cfg, "schedule": {**cfg["schedule"], axis: int(v)}}
        else:
            run_cfg = {**cfg, "graph": {**cfg["graph"], "n": int(v)}}
        exp = build_experiment(run_cfg)
        trace, x_star, z, f, status = _execute(exp, run_cfg, "sim")
        row = {"axis": axis, "value": v, "kind": exp.spec.kind, "alpha": exp.spec.alpha,
               "B": trace.realized_B, "D": trace.realized_D, "horizon": trace.horizon,
               "final_consensus_error": consensus_error(trace)[-1], "status": status,
               "rho": None, "final_distance": None, "final_training_error": None,
               "envelope_violations": None}
        if x_star is not None:
            row["final_distance"] = trace.distances(x_star)[-1]
            row["final_training_error"] = training_error(trace, f, exp.suite)[-1]
            try:
                tol = run_cfg["tolerances"]
                rep = rate_verdict(trace, exp.spec, x_star, rtol=tol["envelope_rtol"],
                                   atol=tol["envelope_atol"])
                row["rho"] = rep.rho_theory
                row["envelope_violations"] = rep.envelope_violations
            except AsyncDGDError as exc:
                row["status"] = type(exc).__name__
        rows.append(row)
    write_rows(out / "sweep.csv", rows, SWEEP_COLUMNS)
    print(f"{len(rows)} runs written to {out / 'sweep.csv'}")
    return 0


def cmd_replay(cfg, out):
    """Recompute a run from its manifest and replay log; compare the trace CSV."""
    out = Path(out)
    man = json.loads((out / MANIFEST_FILE).read_text())
    exp = build_experiment(cfg)
    x0 = np.array(man["resolved"]["x0"], dtype=float)
    sched = read_schedule(out / REPLAY_FILE, exp.graph)
    trace = run_async(exp.spec, sched, x0)
    x_star = man["resolved"]["x_star"]
    x_star = None if x_star is None else np.array(x_star)
    f_star = man["resolved"]["f_star"]
    recomputed = trace_rows(trace, x_star, f_star, exp.suite if f_star is not None else None)
    recorded = read_rows(out / TRACE_FILE)
    same = len(recomputed) == len(recorded) and all(
        all(_eq(a[c], b[c]) for c in a) for a, b in zip(recomputed, recorded))
    print("replay: identical" if same else "replay: MISMATCH")
    return 0 if same else 1


def _eq(a, b):
    if a == "" or a is None:
        return b is None or b == ""
    if isinstance(a, str):
        return a == b
    return float(a) == float(b)


def build_parser():
    p = argparse.ArgumentParser(prog="asyncdgd", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config (defaults apply if omitted)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("run", help="simulate or run live and write CSV outputs")
    common(sp)
    sp.add_argument("--out", default="out")
    sp.add_argument("--mode", choices=("sim", "live"), default="sim")

    sp = sub.add_parser("verify", help="check fixed point, contraction, envelope and gap bounds")
    common(sp)

    sp = sub.add_parser("sweep", help="one run per value along an axis")
    common(sp)
    sp.add_argument("--out", default="out")
    sp.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sp.add_argument("--values", default="", help="comma separated values")
    sp.add_argument("--relative", action="store_true",
                    help="alpha values are fractions of the step-size bound")

    sp = sub.add_parser("replay", help="re-execute a run directory and compare its trace")
    common(sp)
    sp.add_argument("--out", default="out")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
        if args.command == "run":
            return cmd_run(cfg, args.out, args.mode)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "sweep":
            values = [v for v in args.values.split(",") if v.strip()]
            values = [float(v) if args.axis == "alpha" else int(v) for v in values]
            return cmd_sweep(cfg, args.axis, values, args.out, args.relative)
        return cmd_replay(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AsyncDGDError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
