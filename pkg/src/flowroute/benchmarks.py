"""Greedy routing benchmarks and the post-hoc power-control pass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import RoutingEnv, Window
from .layout import NetworkLayout
from .netstate import RouteSolution, hop_sinrs

HEURISTICS = (
    "strongest",
    "best-direction",
    "closest-to-destination",
    "least-interfered",
    "highest-rate",
    "destination-direct",
)


@dataclass(frozen=True)
class HeuristicPolicy:
    name: str
    window: int = 10

    def __post_init__(self):
        if self.name not in HEURISTICS:
            raise ValueError(f"unknown heuristic {self.name!r}; choose from {', '.join(HEURISTICS)}")
        if self.window < 1:
            raise ValueError("window must be >= 1")


def heuristic_band(interference: np.ndarray, eligible: np.ndarray) -> int | None:
    """Eligible band with the least interference (lowest index on ties)."""
    if not eligible.any():
        return None
    return int(np.argmin(np.where(eligible, interference, np.inf)))


def _first_min(values: np.ndarray, ok: np.ndarray) -> int:
    return int(np.argmin(np.where(ok, values, np.inf)))


def heuristic_step(policy: HeuristicPolicy, env: RoutingEnv, win: Window | None = None) -> tuple[int, int] | None:
    """(action, band) for the current window, or None when nothing is eligible.

    Only closest-to-destination ever reprobes. Destination-direct never
    reaches this function (it bypasses candidate discovery).
    """
    win = env.window() if win is None else win
    c = env.c
    k = len(win.nodes)
    usable = win.mask[:, :k].any(axis=0)
    can_reprobe = bool(win.mask[:, c].any())
    name = policy.name

    if not usable.any():
        return (c, 0) if name == "closest-to-destination" and can_reprobe else None

    if name == "strongest":
        slot = int(np.argmax(usable))
    elif name == "best-direction":
        slot = _first_min(win.angle, usable)
    elif name == "closest-to-destination":
        slot = _first_min(win.dist_dest, usable)
        here = env.layout.distances[env.state.frontier, env.dest]
        if win.dist_dest[slot] >= here:
            return (c, 0) if can_reprobe else None
    elif name == "least-interfered":
        per_slot = np.where(win.mask[:, :k], win.interference, np.inf).min(axis=0)
        slot = _first_min(per_slot, usable)
    elif name == "highest-rate":
        f = env.state.frontier
        signal = env.layout.gains[f, win.nodes] * env.powers[f][:, None]  # (B, k)
        sinr = signal / (win.interference + env.noise)
        best = np.where(win.mask[:, :k], sinr, -np.inf)
        band, slot = divmod(int(np.argmax(best)), k)
        return slot, band
    else:
        raise ValueError(f"{name} does not step through candidate windows")

    band = heuristic_band(win.interference[:, slot], win.mask[:, slot])
    return slot, band


def power_control(layout: NetworkLayout, routes: RouteSolution) -> RouteSolution:
    """Scale every hop's power down to its flow's bottleneck SINR.

    Flows are processed once each, strongest bottleneck SINR first; SINRs are
    recomputed before each flow so earlier reductions are taken into account.
    Within one flow all hops are scaled from the same SINR snapshot. A
    (node, band) transmitter shared with other flows is only lowered as far as
    every flow using it can afford, so no flow's bottleneck ever drops.
    """
    out = routes.copy()
    active = [f for f, r in enumerate(out.routes) if r is not None]
    pending = list(active)
    while pending:
        sinrs = {f: hop_sinrs(layout, out, out.routes[f]) for f in active}
        f = max(pending, key=lambda fl: (sinrs[fl].min(), -fl))
        # smallest factor each (tx, band) can take without hurting any flow
        floor: dict[tuple[int, int], float] = {}
        for g in active:
            if g == f:
                continue
            s_min = sinrs[g].min()
            for (tx, _, b), link in zip(out.routes[g].hops(), sinrs[g]):
                floor[tx, b] = max(floor.get((tx, b), 0.0), s_min / link)
        s = sinrs[f]
        bottleneck = s.min()
        for (tx, _, b), link in zip(out.routes[f].hops(), s):
            factor = max(min(1.0, bottleneck / link), floor.get((tx, b), 0.0))
            out.powers[tx, b] *= factor
        pending.remove(f)
    return out
