import numpy as np
import pytest

from asyncdgd import topology as topo
from asyncdgd.engine import Trace, replay, run_async
from asyncdgd.exceptions import (
    CorruptTrace,
    InfeasibleWindow,
    ScheduleSpecMismatch,
    ValidationFailed,
)
from asyncdgd.objectives import quadratic_suite
from asyncdgd.operators import AlgorithmSpec, block_max_distance, quadratic_fixed_point, sync_step
from asyncdgd.schedule import (
    Schedule,
    make_schedule,
    read_schedule,
    validate_schedule,
    write_schedule,
)

from .conftest import ring_quadratic_spec, two_node_spec


# ------------------------------------------------------------------ schedules

def test_partial_zero_zero_is_synchronous():
    g = topo.ring(6)
    a = make_schedule("partial", g, 50, seed=3, B=0, D=0)
    b = make_schedule("sync", g, 50)
    assert a.active == b.active and a.delays == b.delays


def test_partial_windows_and_delays():
    g = topo.ring(8)
    s = make_schedule("partial", g, 100, seed=7, B=2, D=2)
    for i in range(8):
        acts = set(s.activations(i))
        for k in range(100 - 2):
            assert acts & {k, k + 1, k + 2}
    for k, i, sv in s.events():
        assert all(k - 2 <= v <= k for v in sv)
    assert s.realized_B <= 2 and s.realized_D <= 2


def test_total_delay_growth():
    g = topo.ring(4)
    s = make_schedule("total", g, 10_000, seed=0)
    last = s.horizon - 1
    # g(k) = ceil(sqrt(k)) so the lag stays at most 100 up to k = 10^4
    assert s.realized_D <= 100
    lags = [(k, k - min(sv)) for k, _, sv in s.events()]
    assert max(l for k, l in lags if k > last - 200) >= 98
    assert max(l for k, l in lags if k < 100) <= 10
    # the read index itself grows without bound
    assert min(min(sv) for k, _, sv in s.events() if k > last - 200) > 9000


def test_infeasible_window():
    with pytest.raises(InfeasibleWindow):
        make_schedule("partial", topo.ring(3), 2, B=5, D=0)


def test_validator_catches_future_reads():
    s = make_schedule("sync", topo.ring(3), 4)
    s.delays[2][0] = (3, 2)
    with pytest.raises(ValidationFailed):
        validate_schedule(s)


def test_schedule_text_round_trip(tmp_path):
    g = topo.ring(5)
    s = make_schedule("partial", g, 40, seed=1, B=3, D=4)
    p = tmp_path / "s.log"
    write_schedule(s, p)
    back = read_schedule(p, g)
    assert back.active == s.active and back.delays == s.delays
    assert back.mode == "partial" and back.params["B"] == 3
    with pytest.raises(ScheduleSpecMismatch):
        read_schedule(p, topo.ring(6))


# --------------------------------------------------------------------- engine

@pytest.mark.parametrize("kind", ["dgd", "atc"])
def test_sync_schedule_reproduces_sync_step(kind, rng):
    spec = ring_quadratic_spec(kind)
    x0 = rng.standard_normal((spec.n, spec.d))
    trace = run_async(spec, make_schedule("sync", spec.weights.graph, 150), x0)
    X = x0
    for k in range(150):
        X = sync_step(spec, X)
        assert np.array_equal(trace.states[k + 1], X)


def test_single_node_is_gradient_descent():
    g = topo.build_graph(1, [])
    w = topo.Weights.from_matrix(np.ones((1, 1)), g)
    suite = quadratic_suite([np.diag([1.0, 3.0])], [np.array([-1.0, 2.0])])
    spec = AlgorithmSpec("dgd", 0.2, w, suite)
    x = np.array([5.0, 5.0])
    trace = run_async(spec, make_schedule("sync", g, 20), x[None, :])
    for k in range(20):
        x = x - 0.2 * suite[0].grad(x)
        np.testing.assert_allclose(trace.states[k + 1, 0], x, rtol=0, atol=1e-14)


def test_constant_delay_hand_simulation():
    spec = two_node_spec("dgd", 0.5)
    g = spec.weights.graph
    # both nodes active; the neighbour copy read at k is from k - 1 (k >= 1)
    delays = [{0: (max(k - 1, 0),), 1: (max(k - 1, 0),)} for k in range(3)]
    s = Schedule(n=2, horizon=3, neighbors=g.neighbors, active=[(0, 1)] * 3, delays=delays,
                 mode="custom")
    validate_schedule(s)
    tr = run_async(spec, s, np.zeros((2, 1)))
    # x1 = .5 c = (0, 1); x2_1 = .5*1 + .5*x0_0 - .5*(1 - 2) = 1; x3_0 = .5*0 + .5*x1_1 - 0
    np.testing.assert_allclose(tr.states[:, :, 0], [[0, 0], [0, 1], [0, 1], [0.5, 1]], atol=1e-15)


@pytest.mark.parametrize("kind", ["dgd", "atc"])
def test_idle_blocks_are_held(kind):
    spec = ring_quadratic_spec(kind)
    tr = run_async(spec, make_schedule("partial", spec.weights.graph, 200, seed=5, B=4, D=3))
    assert tr.check_hold()


def test_atc_reads_broadcast_messages():
    spec = ring_quadratic_spec("atc", n=4, d=1)
    g = spec.weights.graph
    rng = np.random.default_rng(0)
    sched = make_schedule("partial", g, 30, seed=2, B=2, D=3)
    x0 = rng.standard_normal((4, 1))
    tr = run_async(spec, sched, x0)
    # message y_j^s = x_j^s - alpha grad f_j(x_j^s); it only changes when j updates
    ys = [x0 - spec.alpha * spec.suite.grad_F(x0)]
    for k in range(30):
        y = ys[-1].copy()
        for j in sched.active[k]:
            y[j] = tr.states[k + 1][j] - spec.alpha * spec.suite[j].grad(tr.states[k + 1][j])
        ys.append(y)
    for k, i, sv in sched.events():
        nb = spec.closed_neighborhood(i)
        idx = dict(zip(g.neighbors[i], sv))
        idx[i] = k
        expected = sum(spec.weights.W[i, j] * ys[idx[j]][j] for j in nb)
        np.testing.assert_allclose(tr.states[k + 1][i], expected, atol=1e-14)


@pytest.mark.parametrize("kind", ["dgd", "atc"])
def test_determinism(kind):
    spec = ring_quadratic_spec(kind)
    g = spec.weights.graph
    a = run_async(spec, make_schedule("partial", g, 300, seed=9, B=2, D=2))
    b = run_async(spec, make_schedule("partial", g, 300, seed=9, B=2, D=2))
    assert np.array_equal(a.states, b.states)


def test_total_asynchrony_converges():
    spec = ring_quadratic_spec("dgd", n=6)
    x_star = quadratic_fixed_point(spec)
    tr = run_async(spec, make_schedule("total", spec.weights.graph, 4000, seed=1))
    dist = tr.distances(x_star)
    assert dist[-1] < 1e-4 * dist[0]
    running_min = np.minimum.accumulate(dist)
    assert np.all(np.diff(running_min) <= 0)


# --------------------------------------------------------------------- replay

def test_replay_accepts_simulator_trace():
    spec = ring_quadratic_spec("atc")
    tr = run_async(spec, make_schedule("partial", spec.weights.graph, 100, seed=0, B=2, D=2))
    assert replay(tr, spec)


def test_replay_detects_tampered_state():
    spec = ring_quadratic_spec("dgd")
    tr = run_async(spec, make_schedule("partial", spec.weights.graph, 100, seed=0, B=2, D=2))
    states = tr.states.copy()
    states[40, 3, 1] += 1e-12
    assert not replay(Trace(states, tr.schedule, tr.kind, tr.alpha), spec)


def test_replay_rejects_malformed_trace():
    spec = ring_quadratic_spec("dgd")
    tr = run_async(spec, make_schedule("sync", spec.weights.graph, 10))
    with pytest.raises(CorruptTrace):
        replay(Trace(tr.states[:5], tr.schedule, tr.kind, tr.alpha), spec)
    with pytest.raises(CorruptTrace):
        replay(Trace(tr.states, tr.schedule, "atc", tr.alpha), spec)


def test_schedule_for_other_graph():
    spec = ring_quadratic_spec("dgd")
    with pytest.raises(ScheduleSpecMismatch):
        run_async(spec, make_schedule("sync", topo.path(8), 5))


def test_rejects_wrong_state_shape():
    spec = ring_quadratic_spec("dgd")
    with pytest.raises(ValueError):
        run_async(spec, make_schedule("sync", spec.weights.graph, 5), np.zeros((8, 2)))
