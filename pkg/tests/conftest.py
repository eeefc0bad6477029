import numpy as np
import pytest

from flowroute.config import PhysicalConstants, RunConfig
from flowroute.layout import NetworkLayout, generate_layout
from flowroute.netstate import FlowRoute, RouteSolution, validate


def make_layout(relays, sources, dests, num_bands=2, side=500.0, seed=0):
    relays = np.asarray(relays, dtype=float).reshape(-1, 2)
    return NetworkLayout(
        region_side=side,
        grid_counts=(len(relays),) + (0,) * 8,
        relay_positions=relays,
        sources=np.asarray(sources, dtype=float).reshape(-1, 2),
        destinations=np.asarray(dests, dtype=float).reshape(-1, 2),
        num_bands=num_bands,
        constants=PhysicalConstants(),
        seed=seed,
    )


def random_instance(rng, max_nodes=6, max_bands=2, side=300.0):
    """Small random layout with a feasible random RouteSolution (<= max_nodes nodes)."""
    while True:
        F = int(rng.integers(1, max_nodes // 2 + 1))
        N = int(rng.integers(0, max_nodes - 2 * F + 1))
        B = int(rng.integers(1, max_bands + 1))
        pts = rng.uniform(0, side, size=(N + 2 * F, 2))
        lay = make_layout(pts[:N], pts[N:N + F], pts[N + F:], num_bands=B, side=side)
        sol = RouteSolution.empty(lay)
        for f in range(F):
            k = int(rng.integers(0, N + 1)) if B > 1 else 0
            relays = list(rng.permutation(N)[:k])
            nodes = [lay.source(f), *relays, lay.destination(f)]
            b0 = int(rng.integers(B))
            bands = [(b0 + j) % B if B > 1 else 0 for j in range(len(nodes) - 1)]
            if B > 2:
                bands = [int(rng.integers(B))]
                for _ in range(len(nodes) - 2):
                    bands.append(int(rng.choice([b for b in range(B) if b != bands[-1]])))
            sol.set_route(f, FlowRoute(tuple(nodes), tuple(bands)))
        if rng.random() < 0.3:
            sol.powers *= rng.uniform(0.1, 1.0, size=sol.powers.shape)
        if not validate(sol, lay):
            return lay, sol


@pytest.fixture
def cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def default_layouts():
    c = RunConfig()
    return [generate_layout(c.layout, 5000 + i, c.constants) for i in range(20)]


_REPORT: dict[int, str] = {}


def report(number: int, title: str, ok: bool, detail: str) -> None:
    """Record one acceptance line; all lines are printed at the end of the session."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
    _REPORT[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_REPORT):
            terminalreporter.write_line(_REPORT[k])
