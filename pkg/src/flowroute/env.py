"""Episodic route construction for one flow.

An episode starts at the flow's source. At every step the frontier node
looks at a window of its ``c`` strongest eligible neighbours (plus a reprobe
action that pages to the next ``c``) on every band, and either commits a hop
or reprobes. Other flows' committed routes are frozen and only contribute
interference and half-duplex restrictions.

Action indices are 0-based: slots ``0..c-1`` pick a neighbour, ``c`` reprobes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import EnvConfig
from .layout import NetworkLayout
from .netstate import FlowRoute, RouteSolution, build_occupancy

RUNNING, DONE, FAILED = "running", "done", "failed"
SENTINEL = 1.0


class EpisodeError(RuntimeError):
    """An action that the eligibility mask forbids was requested."""


@dataclass
class Window:
    """Raw (un-normalised) view of the current candidate window."""

    nodes: np.ndarray  # (k,) node ids, k <= c
    dist_frontier: np.ndarray  # (k,)
    dist_dest: np.ndarray  # (k,)
    angle: np.ndarray  # (k,) radians in [0, pi]
    interference: np.ndarray  # (B, k) W, committed transmitters only
    mask: np.ndarray  # (B, c + 1) eligibility


@dataclass
class TraceStep:
    frontier: int
    state: np.ndarray  # (4c,) for the band stored
    action: int
    band: int
    node: int  # chosen node, -1 for reprobe


@dataclass
class EpisodeState:
    flow: int
    frontier: int
    nodes: list[int]
    bands: list[int]
    probe_depth: int = 0
    excluded: set[int] = field(default_factory=set)
    reprobes: int = 0
    status: str = RUNNING
    # reprobe counts per frontier position, aligned with ``nodes``
    reprobes_at: list[int] = field(default_factory=list)


class RoutingEnv:
    """Builds the route of ``flow`` against the routes already in ``routes``.

    ``routes`` is not modified; the flow's own entry (if any) is ignored.
    """

    def __init__(self, layout: NetworkLayout, routes: RouteSolution, flow: int, cfg: EnvConfig):
        self.layout = layout
        self.cfg = cfg
        self.c = cfg.neighbors
        self.B = layout.num_bands
        self.flow = flow
        self.source = layout.source(flow)
        self.dest = layout.destination(flow)
        self.side = layout.region_side
        self.noise = layout.constants.noise_power
        self._noise_db = 10 * math.log10(self.noise)
        self._tx_db = 10 * math.log10(layout.constants.tx_power)
        self._gains = layout.gains
        self._dist = layout.distances
        self.powers = routes.powers

        occ = build_occupancy(routes, exclude=flow)
        self._tx_count = np.zeros((layout.num_nodes, self.B), dtype=np.int32)
        self._rx = np.zeros((layout.num_nodes, self.B), dtype=bool)
        for _, tx, rx, b in routes.all_hops(exclude=flow):
            self._tx_count[tx, b] += 1
            self._rx[rx, b] = True
        self._interference = self._gains.T @ (occ * self.powers)

        # relays plus this flow's destination; other flows' endpoints never relay
        self._candidate_pool = np.append(np.arange(layout.num_relays), self.dest)
        self.state = EpisodeState(flow=flow, frontier=self.source, nodes=[self.source], bands=[], reprobes_at=[0])
        self._order = self._rank_neighbors()
        self._win: Window | None = None
        self._check_alive()

    # -------------------------------------------------------------- queries

    @property
    def done(self) -> bool:
        return self.state.status != RUNNING

    def route(self) -> FlowRoute | None:
        if self.state.status != DONE:
            return None
        return FlowRoute(tuple(self.state.nodes), tuple(self.state.bands))

    def _rank_neighbors(self) -> np.ndarray:
        """Eligible nodes sorted by channel strength to the frontier (nearest first)."""
        st = self.state
        pool = self._candidate_pool
        keep = np.ones(len(pool), dtype=bool)
        visited = set(st.nodes) | st.excluded
        if visited:
            keep &= ~np.isin(pool, list(visited))
        pool = pool[keep]
        d = self._dist[st.frontier, pool]
        return pool[np.lexsort((pool, d))]

    def _window_nodes(self, depth: int) -> tuple[np.ndarray, bool, bool]:
        """(nodes, destination_in_window, more_beyond)."""
        c = self.c
        start = depth * c
        nodes = self._order[start:start + c]
        more = len(self._order) > start + c
        hit = np.flatnonzero(nodes == self.dest)
        if hit.size:
            # drop everything weaker than the destination, and anything that
            # would not bring the route closer to it
            nodes = nodes[: hit[0] + 1]
            front_to_dest = self._dist[self.state.frontier, self.dest]
            closer = self._dist[nodes, self.dest] < front_to_dest
            closer[-1] = True
            nodes = nodes[closer]
            return nodes, True, more
        return nodes, False, more

    def window(self) -> Window:
        if self._win is None:
            self._win = self.window_at(self.state.probe_depth)
        return self._win

    def window_at(self, depth: int) -> Window:
        """Window seen after reprobing up to ``depth`` at the current frontier."""
        st = self.state
        c, B = self.c, self.B
        f = st.frontier
        nodes, dest_in, more = self._window_nodes(depth)
        k = len(nodes)
        pos = self.layout.positions
        d_front = self._dist[f, nodes]
        d_dest = self._dist[nodes, self.dest]
        to_n = pos[nodes] - pos[f]
        to_d = pos[self.dest] - pos[f]
        ang_n = np.arctan2(to_n[:, 1], to_n[:, 0])
        ang_d = math.atan2(to_d[1], to_d[0])
        diff = np.abs(ang_n - ang_d) % (2 * math.pi)
        angle = np.minimum(diff, 2 * math.pi - diff)

        # interference seen at each candidate, minus the frontier's own transmissions
        own = (self._tx_count[f] > 0) * self.powers[f]  # (B,)
        interf = self._interference[nodes].T - own[:, None] * self._gains[f, nodes][None, :]
        interf = np.maximum(interf, 0.0)

        mask = np.zeros((B, c + 1), dtype=bool)
        if k:
            band_ok = ~self._rx[f]  # frontier cannot transmit where it receives
            if st.bands:
                band_ok[st.bands[-1]] = False
            node_ok = ~(self._tx_count[nodes] > 0)  # (k, B): candidate cannot receive where it transmits
            mask[:, :k] = band_ok[:, None] & node_ok.T
        can_reprobe = more and not dest_in and depth < self.cfg.max_reprobes
        mask[:, c] = can_reprobe
        return Window(nodes, d_front, d_dest, angle, interf, mask)

    def features(self, win: Window) -> np.ndarray:
        """Normalised state vectors, one row of length 4c per band."""
        c, B = self.c, self.B
        k = len(win.nodes)
        out = np.full((B, c, 4), SENTINEL)
        if k:
            out[:, :k, 0] = win.dist_frontier / self.side
            out[:, :k, 1] = win.dist_dest / self.side
            out[:, :k, 2] = win.angle / math.pi
            level = 10 * np.log10(win.interference + self.noise)
            out[:, :k, 3] = 2 * (level - self._noise_db) / (self._tx_db - self._noise_db) - 1
        return out.reshape(B, 4 * c)

    def observe(self) -> tuple[Window, np.ndarray]:
        win = self.window()
        return win, self.features(win)

    # -------------------------------------------------------------- dynamics

    def step(self, action: int, band: int) -> None:
        st = self.state
        if st.status != RUNNING:
            raise EpisodeError("episode already finished")
        win = self.window()
        if not (0 <= band < self.B and 0 <= action <= self.c and win.mask[band, action]):
            raise EpisodeError(f"action {action} on band {band} is masked")
        if action == self.c:
            st.probe_depth += 1
            st.reprobes += 1
            st.reprobes_at[-1] += 1
            self._win = None
            self._check_alive()
            return
        node = int(win.nodes[action])
        f = st.frontier
        # everything stronger than the chosen neighbour is dropped for good
        idx = int(np.flatnonzero(self._order == node)[0])
        if idx:
            st.excluded.update(int(n) for n in self._order[:idx] if n != self.dest)
        self._commit(f, node, band)
        st.nodes.append(node)
        st.bands.append(band)
        st.reprobes_at.append(0)
        st.frontier = node
        st.probe_depth = 0
        if node == self.dest:
            st.status = DONE
            return
        if len(st.bands) >= self.cfg.max_hops:
            st.status = FAILED
            return
        self._order = self._rank_neighbors()
        self._win = None
        self._check_alive()

    def _check_alive(self) -> None:
        if not self.window().mask.any():
            self.state.status = FAILED

    def _commit(self, tx: int, rx: int, band: int) -> None:
        if self._tx_count[tx, band] == 0:
            self._interference[:, band] += self._gains[tx] * self.powers[tx, band]
        self._tx_count[tx, band] += 1
        self._rx[rx, band] = True

    def fail(self) -> None:
        self.state.status = FAILED


def direct_route(layout: NetworkLayout, routes: RouteSolution, flow: int) -> FlowRoute:
    """One-hop source -> destination route on the least-interfered band at the destination."""
    src, dst = layout.source(flow), layout.destination(flow)
    occ = build_occupancy(routes, exclude=flow)
    interference = layout.gains[:, dst] @ (occ * routes.powers)
    return FlowRoute((src, dst), (int(np.argmin(interference)),))
