"""JSON experiment configuration and the pipeline objects it resolves to.

Minimal document::

    {
      "schema": "asyncdgd/1",
      "seed": 0,
      "graph": {"generator": "ring", "n": 8},
      "objective": {"type": "quadratic", "d": 3},
      "algorithm": "dgd",
      "schedule": {"mode": "partial", "B": 2, "D": 2},
      "horizon": 500
    }

See ``docs/formats.md`` for every key and its default.
"""

import copy
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import objectives as obj
from . import topology as topo
from .exceptions import ConfigError, NotPositiveDefinite, StepTooLarge
from .operators import ATC, AlgorithmSpec, default_step_size, max_step_size, normalize_kind

SCHEMA = "asyncdgd/1"
DEFAULT_NODES = 8

DEFAULTS = {
    "schema": SCHEMA,
    "seed": 0,
    "graph": {"generator": "ring"},
    "weights": {"scheme": "metropolis", "auto_shift": True},
    "objective": {"type": "quadratic", "d": 3, "mu_range": [0.5, 1.0], "L_range": [1.0, 2.0]},
    "algorithm": "dgd",
    "alpha": {"policy": "default", "unsafe": False},
    "schedule": {"mode": "partial", "B": 2, "D": 2, "p_active": 0.5, "growth": "sqrt"},
    "horizon": 500,
    "init": {"type": "zeros", "scale": 1.0},
    "live": {"duration": 20.0, "target_tol": None, "edge_delays": [], "compute_delays": {}},
    "tolerances": {
        "fixed_point": 1e-12,
        "lyapunov": 1e-8,
        "centralized": 1e-10,
        "oracle_agreement": 1e-6,
        "contraction_slack": 1e-9,
        "envelope_rtol": 1e-9,
        "envelope_atol": 1e-12,
    },
    "verify": {"contraction_samples": 200},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path=None, overrides=None):
    """Read a JSON config (or start from defaults) and apply ``overrides``."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        base_dir = p.parent
    else:
        base_dir = Path.cwd()
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, overrides)
    cfg["_base_dir"] = str(base_dir)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported schema {cfg.get('schema')!r}; expected {SCHEMA!r}")
    if cfg.get("seed") is None:
        raise ConfigError("a seed is required")
    try:
        normalize_kind(cfg["algorithm"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    policy = cfg["alpha"].get("policy", "default")
    if policy not in ("default", "max", "value", "fraction"):
        raise ConfigError(f"unknown alpha policy {policy!r}")
    if policy in ("value", "fraction") and "value" not in cfg["alpha"]:
        raise ConfigError(f"alpha policy {policy!r} needs a 'value'")
    g = cfg["graph"]
    if "edge_file" in g:
        if not _resolve(cfg, g["edge_file"]).exists():
            raise ConfigError(f"edge file {g['edge_file']} not found")
    elif g.get("generator") not in ("ring", "path", "complete", "random-gnp"):
        raise ConfigError(f"unknown graph generator {g.get('generator')!r}")
    o = cfg["objective"]
    if o.get("type") not in ("quadratic", "logistic"):
        raise ConfigError(f"unknown objective type {o.get('type')!r}")
    if o["type"] == "logistic":
        ds = o.get("dataset", "synthetic")
        if ds != "synthetic" and not _resolve(cfg, ds).exists():
            raise ConfigError(f"dataset {ds} not found")
    if cfg["schedule"].get("mode") not in ("sync", "partial", "total"):
        raise ConfigError(f"unknown schedule mode {cfg['schedule'].get('mode')!r}")
    if int(cfg["horizon"]) < 1:
        raise ConfigError("horizon must be positive")


def _resolve(cfg, p):
    p = Path(p)
    return p if p.is_absolute() else Path(cfg.get("_base_dir", ".")) / p


def sub_seed(seed, name):
    """Independent named stream derived from the top-level seed."""
    return int(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]).generate_state(1)[0])


def build_graph(cfg):
    g = cfg["graph"]
    if "edge_file" in g:
        return topo.read_edge_list(_resolve(cfg, g["edge_file"]), g.get("n"))
    # the node count default lives here so it cannot override an edge file
    n = int(g.get("n", DEFAULT_NODES))
    gen = g["generator"]
    if gen == "random-gnp":
        return topo.random_gnp(n, float(g.get("p", 0.5)), g.get("seed", sub_seed(cfg["seed"], "graph")))
    return {"ring": topo.ring, "path": topo.path, "complete": topo.complete}[gen](n)


def build_weights(cfg, graph, kind):
    scheme = cfg["weights"].get("scheme", "metropolis")
    if scheme not in topo.WEIGHT_SCHEMES:
        raise ConfigError(f"unknown weight scheme {scheme!r}")
    w = topo.WEIGHT_SCHEMES[scheme](graph)
    if kind == ATC and cfg["weights"].get("auto_shift", True):
        w = topo.ensure_positive_definite(w)
    return w


def build_suite(cfg, n):
    o = cfg["objective"]
    if o["type"] == "quadratic":
        return obj.random_quadratic_suite(
            n, int(o.get("d", 3)), o.get("seed", sub_seed(cfg["seed"], "objective")),
            mu_range=tuple(o.get("mu_range", (0.5, 1.0))),
            L_range=tuple(o.get("L_range", (1.0, 2.0))),
        )
    ds_name = o.get("dataset", "synthetic")
    if ds_name == "synthetic":
        ds = obj.synthetic_logistic(int(o.get("N", 400)), int(o.get("d", 10)),
                                    o.get("data_seed", sub_seed(cfg["seed"], "dataset")))
    else:
        ds = obj.load_libsvm(_resolve(cfg, ds_name), positive=o.get("positive"),
                             normalize=bool(o.get("normalize", False)))
    parts = obj.partition_dataset(ds, n, sub_seed(cfg["seed"], "partition"))
    return obj.logistic_suite(parts, float(o.get("lambda", 1e-3)), ds.N), ds


def resolve_alpha(cfg, kind, weights, suite):
    """Return ``(alpha, unsafe)`` from the configured policy."""
    a = cfg["alpha"]
    policy = a.get("policy", "default")
    unsafe = bool(a.get("unsafe", False))
    if policy == "default":
        return default_step_size(kind, weights, suite), unsafe
    bound = max_step_size(kind, weights, suite)
    if policy == "max":
        # the bound itself is not admissible; used to probe the boundary
        return bound, True
    if policy == "fraction":
        return float(a["value"]) * bound, unsafe
    return float(a["value"]), unsafe


@dataclass
class Experiment:
    cfg: dict
    graph: object
    weights: object
    suite: object
    spec: AlgorithmSpec
    x0: np.ndarray
    dataset: object = None

    @property
    def seed(self):
        return int(self.cfg["seed"])


def build_experiment(cfg):
    """Resolve a validated config into graph, weights, suite, spec and ``x0``.

    Raises :class:`ConfigError` for an inadmissible step size without the
    ``unsafe`` override; :class:`NotPositiveDefinite` propagates unchanged.
    """
    kind = normalize_kind(cfg["algorithm"])
    graph = build_graph(cfg)
    weights = build_weights(cfg, graph, kind)
    built = build_suite(cfg, graph.n)
    suite, dataset = built if isinstance(built, tuple) else (built, None)
    alpha, unsafe = resolve_alpha(cfg, kind, weights, suite)
    try:
        spec = AlgorithmSpec(kind, alpha, weights, suite, unsafe=unsafe)
    except StepTooLarge as exc:
        raise ConfigError(f"{exc}; set alpha.unsafe to override") from exc
    except NotPositiveDefinite:
        raise
    init = cfg.get("init", {})
    if init.get("type", "zeros") == "zeros":
        x0 = np.zeros((graph.n, suite.d))
    elif init["type"] == "normal":
        rng = np.random.default_rng(sub_seed(cfg["seed"], "init"))
        x0 = float(init.get("scale", 1.0)) * rng.standard_normal((graph.n, suite.d))
    else:
        raise ConfigError(f"unknown init type {init['type']!r}")
    return Experiment(cfg=cfg, graph=graph, weights=weights, suite=suite, spec=spec, x0=x0,
                      dataset=dataset)


def public_config(cfg):
    """Config with internal keys removed, for echoing into manifests."""
    return {k: v for k, v in cfg.items() if not k.startswith("_")}
