"""Routes, spectrum assignments, feasibility rules and link metrics.

A route for flow ``f`` is a node list ``(source, relay, ..., destination)``
plus one band per hop. Transmit powers are stored per (node, band), which
reduces to the usual per-node power when a node transmits on one band.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .config import PhysicalConstants
from .layout import NetworkLayout


@dataclass(frozen=True)
class FlowRoute:
    nodes: tuple[int, ...]
    bands: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "bands", tuple(int(b) for b in self.bands))

    @property
    def num_hops(self) -> int:
        return len(self.bands)

    def hops(self) -> Iterable[tuple[int, int, int]]:
        """Yield (tx, rx, band) for every hop."""
        return zip(self.nodes[:-1], self.nodes[1:], self.bands)


class RouteSolution:
    """Per-flow routes plus the (node, band) transmit-power table."""

    def __init__(self, num_flows: int, num_nodes: int, num_bands: int, tx_power: float = 1.0):
        self.routes: list[FlowRoute | None] = [None] * num_flows
        self.powers = np.full((num_nodes, num_bands), float(tx_power))
        self.num_nodes = num_nodes
        self.num_bands = num_bands

    @classmethod
    def empty(cls, layout: NetworkLayout) -> "RouteSolution":
        return cls(layout.num_flows, layout.num_nodes, layout.num_bands, layout.constants.tx_power)

    @property
    def num_flows(self) -> int:
        return len(self.routes)

    def set_route(self, flow: int, route: FlowRoute | None) -> None:
        self.routes[flow] = route

    def withdraw(self, flow: int) -> FlowRoute | None:
        old, self.routes[flow] = self.routes[flow], None
        return old

    def copy(self) -> "RouteSolution":
        other = RouteSolution(self.num_flows, self.num_nodes, self.num_bands)
        other.routes = list(self.routes)
        other.powers = self.powers.copy()
        return other

    def all_hops(self, exclude: int | None = None) -> Iterable[tuple[int, int, int, int]]:
        """Yield (flow, tx, rx, band) over every committed hop."""
        for f, r in enumerate(self.routes):
            if r is None or f == exclude:
                continue
            for tx, rx, b in r.hops():
                yield f, tx, rx, b

    def to_dict(self) -> dict:
        return {
            "flows": [
                None if r is None else {"nodes": list(r.nodes), "bands": list(r.bands)}
                for r in self.routes
            ],
            "powers": self.powers.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RouteSolution":
        powers = np.asarray(data["powers"], dtype=float)
        sol = cls(len(data["flows"]), powers.shape[0], powers.shape[1])
        sol.powers = powers
        sol.routes = [
            None if r is None else FlowRoute(tuple(r["nodes"]), tuple(r["bands"]))
            for r in data["flows"]
        ]
        return sol


def build_occupancy(routes: RouteSolution, exclude: int | None = None) -> np.ndarray:
    """Binary (node, band) matrix: 1 where some committed hop transmits."""
    x = np.zeros((routes.num_nodes, routes.num_bands), dtype=bool)
    for _, tx, _, b in routes.all_hops(exclude):
        x[tx, b] = True
    return x


def interference_field(
    layout: NetworkLayout, occupancy: np.ndarray, powers: np.ndarray
) -> np.ndarray:
    """I[j, b] = sum_k g[k, j] x[k, b] p[k, b]; the receiver itself never contributes."""
    return layout.gains.T @ (occupancy * powers)


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    flow: int
    hop: int
    rule: str
    message: str = ""


def validate(routes: RouteSolution, layout: NetworkLayout) -> list[Violation]:
    """Return every feasibility violation; an empty list means the solution is valid.

    Rules: ``structure`` (endpoints, lengths, index ranges), ``relay`` (only
    relay nodes may forward), ``adjacent-band`` (consecutive hops of a flow use
    different bands), ``half-duplex`` (no node transmits and receives on the
    same band, across flows) and ``revisit`` (no node twice in one flow).
    """
    out: list[Violation] = []
    B = layout.num_bands
    rx_at: dict[tuple[int, int], list[tuple[int, int]]] = {}
    tx_at: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for f, r in enumerate(routes.routes):
        if r is None:
            continue
        nodes, bands = r.nodes, r.bands
        if len(nodes) < 2 or len(bands) != len(nodes) - 1:
            out.append(Violation(f, -1, "structure", "need >= 2 nodes and one band per hop"))
            continue
        if nodes[0] != layout.source(f):
            out.append(Violation(f, 0, "structure", "route must start at the flow's source"))
        if nodes[-1] != layout.destination(f):
            out.append(Violation(f, len(bands) - 1, "structure", "route must end at the flow's destination"))
        for i, n in enumerate(nodes[1:-1], start=1):
            if not layout.is_relay(n):
                out.append(Violation(f, i - 1, "relay", f"node {n} is not a relay"))
        for j, b in enumerate(bands):
            if not 0 <= b < B:
                out.append(Violation(f, j, "structure", f"band {b} out of range"))
        for j in range(len(bands) - 1):
            if bands[j] == bands[j + 1]:
                out.append(Violation(f, j + 1, "adjacent-band", f"hops {j} and {j + 1} share band {bands[j]}"))
        seen: dict[int, int] = {}
        for i, n in enumerate(nodes):
            if n in seen:
                out.append(Violation(f, i - 1, "revisit", f"node {n} visited at positions {seen[n]} and {i}"))
            else:
                seen[n] = i
        for j, (tx, rx, b) in enumerate(r.hops()):
            tx_at.setdefault((tx, b), []).append((f, j))
            rx_at.setdefault((rx, b), []).append((f, j))
    for key, receivers in rx_at.items():
        for f_rx, j_rx in receivers:
            for f_tx, j_tx in tx_at.get(key, ()):
                if f_tx != f_rx:
                    out.append(Violation(
                        f_tx, j_tx, "half-duplex",
                        f"node {key[0]} transmits for flow {f_tx} and receives for flow {f_rx} on band {key[1]}",
                    ))
    return out


# ---------------------------------------------------------------- metrics


def link_sinr(
    layout: NetworkLayout,
    tx: int,
    rx: int,
    band: int,
    occupancy: np.ndarray,
    powers: np.ndarray,
) -> float:
    """Linear SINR of the link tx -> rx on ``band`` under the given occupancy."""
    if not occupancy[tx, band]:
        raise ValueError(f"node {tx} is not transmitting on band {band}")
    g = layout.gains
    active = occupancy[:, band].copy()
    active[tx] = active[rx] = False
    interference = float(np.dot(g[active, rx], powers[active, band]))
    noise = layout.constants.noise_power
    return float(g[tx, rx] * powers[tx, band] / (interference + noise))


def link_rate(sinr, constants: PhysicalConstants):
    """Shannon rate W log2(1 + SINR) in bit/s."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("link_rate requires a non-negative SINR")
    r = constants.bandwidth_per_band * np.log2(1.0 + s)
    return float(r) if r.ndim == 0 else r


def db(x):
    return 10.0 * np.log10(x)


@dataclass
class FlowMetrics:
    sinr: np.ndarray  # linear, per hop
    rates: np.ndarray  # bit/s, per hop
    bottleneck_hop: int

    @property
    def rate(self) -> float:
        return float(self.rates[self.bottleneck_hop]) if self.bottleneck_hop >= 0 else 0.0

    @property
    def bottleneck_sinr(self) -> float:
        return float(self.sinr[self.bottleneck_hop]) if self.bottleneck_hop >= 0 else 0.0

    @property
    def num_hops(self) -> int:
        return len(self.rates)


@dataclass
class LinkMetrics:
    flows: list[FlowMetrics] = field(default_factory=list)

    @property
    def rates(self) -> np.ndarray:
        return np.array([fm.rate for fm in self.flows])

    @property
    def sum_rate(self) -> float:
        return float(self.rates.sum())

    @property
    def min_rate(self) -> float:
        return float(self.rates.min()) if self.flows else 0.0


class InvalidRoutes(ValueError):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__(f"{len(self.violations)} violation(s), first: {self.violations[0]}")


def hop_sinrs(layout: NetworkLayout, routes: RouteSolution, route: FlowRoute) -> np.ndarray:
    """Linear SINR of each hop of ``route`` against the full occupancy of ``routes``."""
    occ = build_occupancy(routes)
    g = layout.gains
    noise = layout.constants.noise_power
    out = np.empty(route.num_hops)
    for j, (tx, rx, b) in enumerate(route.hops()):
        active = occ[:, b].copy()
        active[tx] = active[rx] = False
        interference = np.dot(g[active, rx], routes.powers[active, b])
        out[j] = g[tx, rx] * routes.powers[tx, b] / (interference + noise)
    return out


def flow_rates(layout: NetworkLayout, routes: RouteSolution, check: bool = True) -> LinkMetrics:
    """Per-hop SINR/rate and per-flow bottleneck for every committed flow.

    Unrouted flows get empty arrays, rate 0 and bottleneck hop -1.
    """
    if check:
        violations = validate(routes, layout)
        if violations:
            raise InvalidRoutes(violations)
    metrics = LinkMetrics()
    for r in routes.routes:
        if r is None:
            metrics.flows.append(FlowMetrics(np.empty(0), np.empty(0), -1))
            continue
        sinr = hop_sinrs(layout, routes, r)
        rates = link_rate(sinr, layout.constants)
        metrics.flows.append(FlowMetrics(sinr, np.atleast_1d(rates), int(np.argmin(rates))))
    return metrics
