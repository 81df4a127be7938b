"""Asynchronous DGD and DGD-ATC with bounded or unbounded communication delays."""

from .engine import Trace, replay, run_async
from .estimator import AsyncDecentralizedLogisticRegression
from .live import run_live
from .metrics import consensus_error, rate_verdict, training_error
from .objectives import (
    Dataset,
    ObjectiveSuite,
    centralized_solve,
    logistic_suite,
    partition_dataset,
    quadratic_suite,
    random_quadratic_suite,
    synthetic_logistic,
)
from .operators import (
    ATC,
    DGD,
    AlgorithmSpec,
    block_max_distance,
    block_max_norm,
    contraction_factor,
    default_step_size,
    gap_report,
    lyapunov_oracle,
    max_step_size,
    operator_T,
    operator_T_block,
    quadratic_fixed_point,
    solve_fixed_point,
    sync_step,
)
from .schedule import Schedule, make_schedule
from .topology import (
    Graph,
    Weights,
    build_graph,
    ensure_positive_definite,
    lazy_weights,
    metropolis_weights,
    spectral_summary,
)

__version__ = "0.1.0"
