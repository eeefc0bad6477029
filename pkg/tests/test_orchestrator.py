import numpy as np
import pytest

from flowroute.agent import DuelingQNet
from flowroute.benchmarks import HeuristicPolicy
from flowroute.config import AgentConfig, EnvConfig
from flowroute.netstate import build_occupancy, flow_rates, validate
from flowroute.orchestrator import (
    AgentPolicy,
    BenchmarkPolicy,
    FlowResult,
    fairness_order,
    route_flow,
    run_rounds,
)


def tiny_agent(seed=0):
    return DuelingQNet(10, AgentConfig(trunk_units=(16,), head_units=8), rng=np.random.default_rng(seed))


def test_fairness_order_examples():
    assert fairness_order([3.0, 1.0, 2.0]) == [0, 2, 1]
    assert fairness_order([1.0, 1.0, 5.0]) == [2, 0, 1]
    assert fairness_order([0.0, 0.0]) == [0, 1]


def test_two_rounds_three_flows_is_six_episodes(default_layouts):
    res = run_rounds(default_layouts[0], AgentPolicy(tiny_agent(), EnvConfig()), num_rounds=2)
    assert res.episodes == 6
    assert len(res.rounds) == 2
    assert res.rounds[0].order == [0, 1, 2]
    assert sorted(res.rounds[1].order) == [0, 1, 2]


def test_round_two_order_follows_round_one_rates(default_layouts):
    pol = BenchmarkPolicy(HeuristicPolicy("best-direction"), EnvConfig())
    res = run_rounds(default_layouts[1], pol, num_rounds=2)
    assert res.rounds[1].order == fairness_order(res.rounds[0].metrics.rates)
    assert run_rounds(default_layouts[1], pol, num_rounds=2, fairness=False).rounds[1].order == [0, 1, 2]


def test_deterministic(default_layouts):
    pol = AgentPolicy(tiny_agent(3), EnvConfig())
    a = run_rounds(default_layouts[2], pol)
    b = run_rounds(default_layouts[2], pol)
    assert a.routes.routes == b.routes.routes
    assert np.array_equal(a.metrics.rates, b.metrics.rates)


@pytest.mark.parametrize("name", ["strongest", "best-direction", "closest-to-destination",
                                  "least-interfered", "highest-rate", "destination-direct"])
def test_all_rounds_valid(default_layouts, name):
    pol = BenchmarkPolicy(HeuristicPolicy(name), EnvConfig())
    for lay in default_layouts[:5]:
        res = run_rounds(lay, pol, num_rounds=3)
        for snap in res.rounds:
            assert validate(snap.routes, lay) == []
            assert all(r is not None for r in snap.routes.routes)


def test_no_stale_occupancy_after_reroute(default_layouts):
    lay = default_layouts[3]
    res = run_rounds(lay, AgentPolicy(tiny_agent(1), EnvConfig()), num_rounds=2)
    occ = build_occupancy(res.routes)
    expected = np.zeros_like(occ)
    for r in res.routes.routes:
        for tx, _, b in r.hops():
            expected[tx, b] = True
    assert np.array_equal(occ, expected)
    assert np.array_equal(res.metrics.rates, flow_rates(lay, res.routes).rates)


class FailingPolicy:
    name = "fails"

    def route(self, layout, routes, flow):
        return FlowResult(None, reprobes=2)


def test_failure_falls_back_to_direct(default_layouts):
    lay = default_layouts[4]
    res = run_rounds(lay, FailingPolicy(), num_rounds=2)
    assert res.fallbacks == 6
    assert all(r.num_hops == 1 for r in res.routes.routes)
    single = route_flow(FailingPolicy(), lay, res.routes, 0)
    assert single.route.nodes == (lay.source(0), lay.destination(0))


def test_rejects_zero_rounds(default_layouts):
    with pytest.raises(ValueError):
        run_rounds(default_layouts[0], FailingPolicy(), num_rounds=0)
