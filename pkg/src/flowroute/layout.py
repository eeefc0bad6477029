"""Seeded random ad-hoc network layouts.

Node indexing used throughout the package: relays occupy ``0..N-1``,
sources ``N..N+F-1`` and destinations ``N+F..N+2F-1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import channel
from .config import ConfigError, LayoutConfig, PhysicalConstants

# independent random streams derived from one seed
STREAM_LAYOUT = 0
STREAM_EXPLORE = 1
STREAM_INIT = 2
STREAM_REPLAY = 3

LAYOUT_FORMAT = "flowroute.layout/1"


def make_rng(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Generator for one named stream of ``seed``; streams never overlap."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), *map(int, extra)))
    return np.random.default_rng(ss)


@dataclass(eq=False)
class NetworkLayout:
    region_side: float
    grid_counts: tuple[int, ...]
    relay_positions: np.ndarray  # (N, 2)
    sources: np.ndarray  # (F, 2)
    destinations: np.ndarray  # (F, 2)
    num_bands: int
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    seed: int = 0

    @property
    def num_relays(self) -> int:
        return len(self.relay_positions)

    @property
    def num_flows(self) -> int:
        return len(self.sources)

    @property
    def num_nodes(self) -> int:
        return self.num_relays + 2 * self.num_flows

    def source(self, flow: int) -> int:
        return self.num_relays + flow

    def destination(self, flow: int) -> int:
        return self.num_relays + self.num_flows + flow

    def is_relay(self, node: int) -> bool:
        return 0 <= node < self.num_relays

    @cached_property
    def positions(self) -> np.ndarray:
        return np.vstack([self.relay_positions, self.sources, self.destinations])

    @cached_property
    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    @cached_property
    def gains(self) -> np.ndarray:
        return channel.gain_matrix(self.positions, self.constants)

    def cell_of(self, relay: int) -> int:
        """Grid cell (row-major, 3x3) the relay was drawn in."""
        return int(np.searchsorted(np.cumsum(self.grid_counts), relay, side="right"))

    def with_bands(self, num_bands: int) -> "NetworkLayout":
        return NetworkLayout(
            self.region_side, self.grid_counts, self.relay_positions, self.sources,
            self.destinations, num_bands, self.constants, self.seed,
        )

    def __eq__(self, other):
        if not isinstance(other, NetworkLayout):
            return NotImplemented
        return (
            self.region_side == other.region_side
            and tuple(self.grid_counts) == tuple(other.grid_counts)
            and np.array_equal(self.relay_positions, other.relay_positions)
            and np.array_equal(self.sources, other.sources)
            and np.array_equal(self.destinations, other.destinations)
            and self.num_bands == other.num_bands
            and self.constants == other.constants
            and self.seed == other.seed
        )


def cell_bounds(region_side: float, cell: int) -> tuple[float, float, float, float]:
    """(x0, x1, y0, y1) of a 3x3 grid cell, row-major from the origin."""
    w = region_side / 3.0
    row, col = divmod(cell, 3)
    return col * w, (col + 1) * w, row * w, (row + 1) * w


def generate_layout(
    cfg: LayoutConfig,
    seed: int,
    constants: PhysicalConstants | None = None,
) -> NetworkLayout:
    if cfg.region_side <= 0 or cfg.num_flows < 1:
        raise ConfigError("layout needs a positive region and at least one flow")
    rng = make_rng(seed, STREAM_LAYOUT)
    side = cfg.region_side
    relays = []
    for cell, count in enumerate(cfg.grid_counts):
        x0, x1, y0, y1 = cell_bounds(side, cell)
        pts = rng.uniform((x0, y0), (x1, y1), size=(count, 2))
        relays.append(pts)
    relay_pos = np.vstack(relays) if relays else np.zeros((0, 2))

    min_sep = cfg.min_endpoint_separation * side
    sources = np.empty((cfg.num_flows, 2))
    dests = np.empty((cfg.num_flows, 2))
    for f in range(cfg.num_flows):
        while True:
            s, t = rng.uniform(0.0, side, size=(2, 2))
            if np.hypot(*(s - t)) >= min_sep:
                break
        sources[f], dests[f] = s, t

    return NetworkLayout(
        region_side=float(side),
        grid_counts=tuple(int(n) for n in cfg.grid_counts),
        relay_positions=relay_pos,
        sources=sources,
        destinations=dests,
        num_bands=int(cfg.num_bands),
        constants=constants or PhysicalConstants(),
        seed=int(seed),
    )


def layout_to_dict(layout: NetworkLayout) -> dict:
    from dataclasses import asdict

    return {
        "format": LAYOUT_FORMAT,
        "region_side": layout.region_side,
        "grid_counts": list(layout.grid_counts),
        "relay_positions": layout.relay_positions.tolist(),
        "flows": [
            {"src": s.tolist(), "dst": t.tolist()}
            for s, t in zip(layout.sources, layout.destinations)
        ],
        "num_bands": layout.num_bands,
        "constants": asdict(layout.constants),
        "seed": layout.seed,
    }


def layout_from_dict(data: dict) -> NetworkLayout:
    fmt = data.get("format", LAYOUT_FORMAT)
    if fmt != LAYOUT_FORMAT:
        raise ValueError(f"unsupported layout format {fmt!r}")
    flows = data["flows"]
    return NetworkLayout(
        region_side=float(data["region_side"]),
        grid_counts=tuple(int(n) for n in data["grid_counts"]),
        relay_positions=np.asarray(data["relay_positions"], dtype=float).reshape(-1, 2),
        sources=np.asarray([fl["src"] for fl in flows], dtype=float).reshape(-1, 2),
        destinations=np.asarray([fl["dst"] for fl in flows], dtype=float).reshape(-1, 2),
        num_bands=int(data["num_bands"]),
        constants=PhysicalConstants(**data["constants"]),
        seed=int(data["seed"]),
    )


def save_layout(layout: NetworkLayout, path: str | Path, routes=None) -> None:
    """Write a layout document; ``routes`` (a RouteSolution) is stored alongside if given."""
    doc = layout_to_dict(layout)
    if routes is not None:
        doc["routes"] = routes.to_dict()
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_layout(path: str | Path) -> NetworkLayout:
    return layout_from_dict(json.loads(Path(path).read_text()))
