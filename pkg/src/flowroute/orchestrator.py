"""Sequential multi-flow, multi-round routing with fairness ordering."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .agent import DuelingQNet
from .benchmarks import HeuristicPolicy, heuristic_step
from .config import EnvConfig
from .env import RoutingEnv, TraceStep, direct_route
from .layout import NetworkLayout
from .netstate import FlowRoute, LinkMetrics, RouteSolution, flow_rates
from .training import run_episode


@dataclass
class FlowResult:
    route: FlowRoute | None  # None means the episode failed
    reprobes: int = 0
    trace: list[TraceStep] = field(default_factory=list)


class Policy(Protocol):
    name: str

    def route(self, layout: NetworkLayout, routes: RouteSolution, flow: int) -> FlowResult: ...


class AgentPolicy:
    """Greedy (epsilon = 0) rollout of a trained network."""

    name = "ddqn"

    def __init__(self, model: DuelingQNet, env_cfg: EnvConfig, trace: bool = False):
        if env_cfg.neighbors != model.c:
            env_cfg = EnvConfig(model.c, env_cfg.max_hops, env_cfg.max_reprobes)
        self.model = model
        self.env_cfg = env_cfg
        self.trace = trace

    def route(self, layout, routes, flow) -> FlowResult:
        ep = run_episode(self.model, layout, routes, flow, self.env_cfg, trace=self.trace)
        return FlowResult(ep.route, ep.reprobes, ep.trace)


class BenchmarkPolicy:
    def __init__(self, heuristic: HeuristicPolicy, env_cfg: EnvConfig):
        self.heuristic = heuristic
        self.name = heuristic.name
        self.env_cfg = EnvConfig(heuristic.window, env_cfg.max_hops, env_cfg.max_reprobes)

    def route(self, layout, routes, flow) -> FlowResult:
        if self.heuristic.name == "destination-direct":
            return FlowResult(direct_route(layout, routes, flow))
        env = RoutingEnv(layout, routes, flow, self.env_cfg)
        while not env.done:
            pick = heuristic_step(self.heuristic, env)
            if pick is None:
                env.fail()
                break
            env.step(*pick)
        return FlowResult(env.route(), env.state.reprobes)


def route_flow(policy: Policy, layout: NetworkLayout, routes: RouteSolution, flow: int) -> FlowResult:
    """Route one flow, falling back to a direct source-destination hop on failure."""
    res = policy.route(layout, routes, flow)
    if res.route is None:
        return FlowResult(direct_route(layout, routes, flow), res.reprobes, res.trace)
    return res


def fairness_order(rates) -> list[int]:
    """Flows by bottleneck rate, highest first (so the weakest re-routes last); ties by index."""
    r = np.asarray(rates, dtype=float)
    return sorted(range(len(r)), key=lambda f: (-r[f], f))


@dataclass
class RoundSnapshot:
    index: int
    order: list[int]
    routes: RouteSolution
    metrics: LinkMetrics


@dataclass
class RoundsResult:
    routes: RouteSolution
    metrics: LinkMetrics
    rounds: list[RoundSnapshot]
    episodes: int
    reprobes: list[int]  # per flow, from its last episode
    fallbacks: int

    @property
    def hops(self) -> list[int]:
        return [r.num_hops for r in self.routes.routes]


def run_rounds(
    layout: NetworkLayout,
    policy: Policy,
    num_rounds: int = 2,
    fairness: bool = True,
) -> RoundsResult:
    """Route all flows sequentially, ``num_rounds`` times.

    Round 1 follows flow index order. Later rounds withdraw each flow just
    before re-routing it, in fairness order when ``fairness`` is set.
    """
    if num_rounds < 1:
        raise ValueError("num_rounds must be >= 1")
    F = layout.num_flows
    routes = RouteSolution.empty(layout)
    snapshots: list[RoundSnapshot] = []
    reprobes = [0] * F
    episodes = fallbacks = 0
    order = list(range(F))
    for rnd in range(num_rounds):
        if rnd and fairness:
            order = fairness_order(snapshots[-1].metrics.rates)
        for f in order:
            routes.withdraw(f)
            res = policy.route(layout, routes, f)
            episodes += 1
            if res.route is None:
                fallbacks += 1
                res.route = direct_route(layout, routes, f)
            routes.set_route(f, res.route)
            reprobes[f] = res.reprobes
        snapshots.append(RoundSnapshot(rnd, list(order), routes.copy(), flow_rates(layout, routes)))
    return RoundsResult(routes, snapshots[-1].metrics, snapshots, episodes, reprobes, fallbacks)
