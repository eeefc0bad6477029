import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowroute.config import PhysicalConstants
from flowroute.netstate import (
    FlowRoute,
    InvalidRoutes,
    RouteSolution,
    build_occupancy,
    flow_rates,
    link_rate,
    link_sinr,
    validate,
)

from conftest import make_layout, random_instance
from oracles import brute_flow_rates, brute_sinr

K = PhysicalConstants()


def line_layout(num_bands=8):
    # relays 0..3 on the x axis, one flow from (0,0) to (500,0)
    return make_layout([(100, 0), (200, 0), (300, 0), (400, 0)], [(0, 0)], [(500, 0)], num_bands=num_bands)


def test_occupancy_direct_mapping():
    lay = make_layout([(100, 0), (200, 0)], [(0, 0)], [(300, 0)], num_bands=6)
    sol = RouteSolution.empty(lay)
    src, dst = lay.source(0), lay.destination(0)
    sol.set_route(0, FlowRoute((src, 0, dst), (2, 5)))
    x = build_occupancy(sol)
    assert x[src, 2] and x[0, 5]
    assert x.sum() == 2
    assert not x[dst].any()


def test_occupancy_empty():
    lay = line_layout()
    assert not build_occupancy(RouteSolution.empty(lay)).any()


def test_occupancy_shared_relay_disjoint_bands():
    lay = make_layout([(250, 250)], [(0, 0), (500, 0)], [(500, 500), (0, 500)], num_bands=4)
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, lay.destination(0)), (0, 1)))
    sol.set_route(1, FlowRoute((lay.source(1), 0, lay.destination(1)), (2, 3)))
    x = build_occupancy(sol)
    assert x[0, 1] and x[0, 3]
    assert validate(sol, lay) == []


def rules(violations):
    return {v.rule for v in violations}


def test_adjacent_band_violation():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, 1, lay.destination(0)), (3, 3, 4)))
    v = validate(sol, lay)
    assert rules(v) == {"adjacent-band"}
    assert v[0].flow == 0 and v[0].hop == 1


def test_revisit_violation():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, 1, 0, lay.destination(0)), (1, 2, 1, 2)))
    assert "revisit" in rules(validate(sol, lay))


def test_alternating_bands_valid():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, 1, 2, lay.destination(0)), (1, 2, 1, 2)))
    assert validate(sol, lay) == []


def test_half_duplex_across_flows():
    lay = make_layout([(250, 250)], [(0, 0), (500, 0)], [(500, 500), (0, 500)], num_bands=4)
    sol = RouteSolution.empty(lay)
    # flow 0 receives at relay 0 on band 0; flow 1 transmits from relay 0 on band 0
    sol.set_route(0, FlowRoute((lay.source(0), 0, lay.destination(0)), (0, 1)))
    sol.set_route(1, FlowRoute((lay.source(1), 0, lay.destination(1)), (2, 0)))
    assert rules(validate(sol, lay)) == {"half-duplex"}


def test_structure_violations():
    lay = make_layout([(100, 0)], [(0, 0), (0, 100)], [(300, 0), (300, 100)], num_bands=2)
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), lay.destination(1)), (0,)))
    sol.set_route(1, FlowRoute((lay.source(1), lay.source(0), lay.destination(1)), (0, 1)))
    r = rules(validate(sol, lay))
    assert "structure" in r and "relay" in r


def test_sinr_no_interferers():
    lay = make_layout([], [(0, 0)], [(100, 0)], num_bands=1)
    occ = np.zeros((lay.num_nodes, 1), dtype=bool)
    src, dst = lay.source(0), lay.destination(0)
    occ[src, 0] = True
    g = lay.gains[src, dst]
    powers = np.full((lay.num_nodes, 1), 2 * K.noise_power / g)
    assert link_sinr(lay, src, dst, 0, occ, powers) == pytest.approx(2.0, rel=1e-12)


def test_sinr_equal_interferer_tends_to_one():
    # interferer at the same distance from rx as the transmitter
    lay = make_layout([], [(0, 0), (200, 0)], [(100, 0), (300, 0)], num_bands=1)
    occ = np.zeros((lay.num_nodes, 1), dtype=bool)
    occ[lay.source(0), 0] = occ[lay.source(1), 0] = True
    powers = np.full((lay.num_nodes, 1), 1e6)  # drown the noise
    s = link_sinr(lay, lay.source(0), lay.destination(0), 0, occ, powers)
    assert s == pytest.approx(1.0, rel=1e-6)


def test_sinr_requires_active_transmitter():
    lay = line_layout()
    occ = np.zeros((lay.num_nodes, lay.num_bands), dtype=bool)
    with pytest.raises(ValueError):
        link_sinr(lay, 0, 1, 0, occ, np.ones_like(occ, dtype=float))


def test_link_rate_values():
    assert link_rate(1.0, K) == pytest.approx(5e6)
    assert link_rate(3.0, K) == pytest.approx(10e6)
    assert link_rate(0.0, K) == 0.0
    with pytest.raises(ValueError):
        link_rate(-0.1, K)


def test_bottleneck_is_min_hop():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, 2, lay.destination(0)), (0, 1, 2)))
    fm = flow_rates(lay, sol).flows[0]
    assert fm.rate == fm.rates.min()
    assert fm.bottleneck_hop == int(np.argmin(fm.rates))
    # 200 m hop (relay 0 -> relay 2) is the weakest, all hops interference-free on distinct bands
    assert fm.bottleneck_hop == 1


def test_single_hop_bottleneck():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), lay.destination(0)), (4,)))
    fm = flow_rates(lay, sol).flows[0]
    assert fm.num_hops == 1 and fm.rate == fm.rates[0]


def test_flow_rates_rejects_invalid():
    lay = line_layout()
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), 0, lay.destination(0)), (1, 1)))
    with pytest.raises(InvalidRoutes):
        flow_rates(lay, sol)


def test_spectral_efficiency_rounding():
    # 4.90 Mbps summed over 8 bands x 5 MHz is 0.1225 bps/Hz, 0.123 when rounded half up
    se = 4.90e6 / (8 * 5e6)
    assert se == pytest.approx(0.1225, rel=1e-12)
    assert math.floor(se * 1000 + 0.5 + 1e-9) / 1000 == pytest.approx(0.123)


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        lay, sol = random_instance(rng)
        occ = build_occupancy(sol)
        got = flow_rates(lay, sol)
        want = brute_flow_rates(lay, sol)
        for f, r in enumerate(sol.routes):
            for j, (tx, rx, b) in enumerate(r.hops()):
                s = link_sinr(lay, tx, rx, b, occ, sol.powers)
                assert s == pytest.approx(want[f][0][j], rel=1e-12)
                assert got.flows[f].sinr[j] == pytest.approx(want[f][0][j], rel=1e-12)
            assert got.flows[f].rate == pytest.approx(want[f][2], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_deactivating_others_never_hurts(seed):
    rng = np.random.default_rng(seed)
    lay, sol = random_instance(rng, max_nodes=6, max_bands=2)
    occ = build_occupancy(sol)
    r = sol.routes[0]
    own = {(tx, b) for tx, _, b in r.hops()}
    others = [(k, b) for k, b in zip(*np.nonzero(occ)) if (k, b) not in own]
    reduced = occ.copy()
    for k, b in others:
        if rng.random() < 0.5:
            reduced[k, b] = False
    for tx, rx, b in r.hops():
        assert link_sinr(lay, tx, rx, b, reduced, sol.powers) >= link_sinr(lay, tx, rx, b, occ, sol.powers)


def test_bottleneck_invariant_to_other_flow_relabeling():
    rng = np.random.default_rng(5)
    lay, sol = random_instance(rng, max_nodes=6)
    base = flow_rates(lay, sol).rates
    # reversing flow order of hop enumeration does not change anything
    rev = RouteSolution.empty(lay)
    rev.powers = sol.powers.copy()
    for f in reversed(range(sol.num_flows)):
        rev.set_route(f, sol.routes[f])
    assert np.array_equal(flow_rates(lay, rev).rates, base)


def test_solution_roundtrip():
    rng = np.random.default_rng(2)
    lay, sol = random_instance(rng)
    back = RouteSolution.from_dict(sol.to_dict())
    assert back.routes == sol.routes
    assert np.array_equal(back.powers, sol.powers)


def test_brute_oracle_noise_floor():
    lay = make_layout([], [(0, 0)], [(50, 0)], num_bands=1)
    sol = RouteSolution.empty(lay)
    sol.set_route(0, FlowRoute((lay.source(0), lay.destination(0)), (0,)))
    s = brute_sinr(lay, sol, lay.source(0), lay.destination(0), 0)
    assert s == pytest.approx(lay.gains[lay.source(0), lay.destination(0)] / K.noise_power, rel=1e-12)
    assert math.isfinite(s)
