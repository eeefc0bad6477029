"""Experience generation and the three-phase training schedule.

Targets are Monte-Carlo: once a route is complete, each decision taken at
frontier position ``t`` is labelled with the bottleneck SINR (dB, plus a
bias) of hops ``t..h``, optionally shrunk by ``lambda ** (h - t)``. There is
no bootstrapping and no target network.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import DuelingQNet, argmax_masked
from .benchmarks import HeuristicPolicy
from .config import EnvConfig, RunConfig
from .env import RoutingEnv, TraceStep
from .layout import STREAM_EXPLORE, STREAM_INIT, STREAM_LAYOUT, STREAM_REPLAY, generate_layout, make_rng
from .netstate import FlowRoute, RouteSolution, hop_sinrs

log = logging.getLogger(__name__)

METRICS_HEADER = ("step", "epsilon", "loss", "mean_target", "episode_length", "reprobes")


def assign_rewards(sinr_db, bias: float, discount: float = 1.0) -> np.ndarray:
    """Target for the decision at every frontier position of a finished route.

    ``sinr_db[i]`` is hop ``i``'s SINR in dB; the result has one entry per hop:
    ``max(min(sinr_db[t:]) + bias, 0) * discount ** (h - t)`` with ``h`` the
    index of the last hop.
    """
    s = np.asarray(sinr_db, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("need at least one hop")
    suffix_min = np.minimum.accumulate(s[::-1])[::-1]
    # scalar pow keeps the factors identical to libm's, hop by hop
    shrink = np.array([float(discount) ** k for k in range(s.size - 1, -1, -1)])
    return np.maximum(suffix_min + bias, 0.0) * shrink


class ReplayBuffer:
    """Fixed-capacity FIFO of (state, action, target) with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, rng: np.random.Generator):
        self.capacity = int(capacity)
        self.state_dim = state_dim
        self.rng = rng
        self._alloc = min(self.capacity, 4096)
        self.states = np.empty((self._alloc, state_dim))
        self.actions = np.empty(self._alloc, dtype=np.int64)
        self.targets = np.empty(self._alloc)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def _grow(self, needed: int) -> None:
        if needed <= self._alloc or self._alloc == self.capacity:
            return
        new = min(self.capacity, max(needed, 2 * self._alloc))
        for name in ("states", "actions", "targets"):
            old = getattr(self, name)
            arr = np.empty((new,) + old.shape[1:], dtype=old.dtype)
            arr[: self._size] = old[: self._size]
            setattr(self, name, arr)
        self._alloc = new

    def add(self, state: np.ndarray, action: int, target: float) -> None:
        self._grow(self._size + 1)
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.targets[i] = target
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def extend(self, transitions: list["Transition"]) -> None:
        for t in transitions:
            self.add(t.state, t.action, t.target)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        return self.rng.integers(0, self._size, size=batch_size)

    def sample(self, batch_size: int):
        idx = self.sample_indices(batch_size)
        return self.states[idx], self.actions[idx], self.targets[idx]


@dataclass
class Transition:
    state: np.ndarray
    action: int
    target: float
    position: int  # frontier position in the route (hop index the decision belongs to)


@dataclass
class Episode:
    transitions: list[Transition]
    route: FlowRoute | None
    reprobes: int
    trace: list[TraceStep] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.route is None


def _random_choice(env: RoutingEnv, rng: np.random.Generator):
    """Uniform random reachable node and eligible band.

    Returns (depth, slot, band) where ``depth`` is the probe depth whose window
    holds the node, or None if nothing is reachable.
    """
    depth = env.state.probe_depth
    options = []  # (depth, slot, eligible band list)
    while True:
        win = env.window_at(depth)
        for slot in range(len(win.nodes)):
            bands = np.flatnonzero(win.mask[:, slot])
            if bands.size:
                options.append((depth, slot, bands))
        if not win.mask[:, env.c].any():
            break
        depth += 1
    if not options:
        return None
    d, slot, bands = options[int(rng.integers(len(options)))]
    return d, slot, int(bands[int(rng.integers(len(bands)))])


def run_episode(
    model: DuelingQNet | None,
    layout,
    routes: RouteSolution,
    flow: int,
    env_cfg: EnvConfig,
    epsilon: float = 0.0,
    rng: np.random.Generator | None = None,
    bias: float = 40.0,
    discount: float = 1.0,
    trace: bool = False,
) -> Episode:
    """Route ``flow`` with an epsilon-greedy agent and label the decisions.

    ``model`` may be None only when ``epsilon == 1``. Failed episodes keep
    their transitions with target 0.
    """
    env = RoutingEnv(layout, routes, flow, env_cfg)
    c = env.c
    pending: list[tuple[np.ndarray, int, int]] = []  # (state, action, position)
    steps: list[TraceStep] = []

    def record(feats, action, band, node):
        pending.append((feats[band], action, len(env.state.bands)))
        if trace:
            steps.append(TraceStep(env.state.frontier, feats[band].copy(), action, band, node))

    while not env.done:
        win, feats = env.observe()
        if epsilon > 0 and (epsilon >= 1 or rng.random() < epsilon):
            pick = _random_choice(env, rng)
            if pick is None:
                env.fail()
                break
            depth, slot, band = pick
            while env.state.probe_depth < depth:
                record(feats, c, band, -1)
                env.step(c, band)
                win, feats = env.observe()
            record(feats, slot, band, int(win.nodes[slot]))
            env.step(slot, band)
        else:
            pick = argmax_masked(model.forward(feats), win.mask)
            if pick is None:
                env.fail()
                break
            band, action = pick
            record(feats, action, band, int(win.nodes[action]) if action < c else -1)
            env.step(action, band)

    route = env.route()
    if route is None:
        transitions = [Transition(s, a, 0.0, p) for s, a, p in pending]
    else:
        trial = routes.copy()
        trial.set_route(flow, route)
        sinr_db = 10.0 * np.log10(hop_sinrs(layout, trial, route))
        targets = assign_rewards(sinr_db, bias, discount)
        transitions = [Transition(s, a, float(targets[p]), p) for s, a, p in pending]
    return Episode(transitions, route, env.state.reprobes, steps)


def explore_episode(model, layout, routes, flow, epsilon, rng, cfg: RunConfig) -> Episode:
    return run_episode(
        model, layout, routes, flow, cfg.env, epsilon, rng,
        bias=cfg.training.bias, discount=cfg.training.discount,
    )


def epsilon_schedule(episode: int, cfg: RunConfig) -> tuple[int, float]:
    """(phase, epsilon) for a global episode index: 1 random, 2 annealed, 3 greedy."""
    p1, p2, _ = cfg.training.phases
    t = cfg.training
    if episode < p1:
        return 1, 1.0
    if episode < p1 + p2:
        frac = (episode - p1) / max(p2 - 1, 1)
        return 2, t.epsilon_start + frac * (t.epsilon_end - t.epsilon_start)
    return 3, 0.0


def training_layout_seed(base_seed: int, episode: int) -> int:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(STREAM_LAYOUT, 1 << 20, int(episode)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def heuristic_background(layout, cfg: RunConfig, skip: int) -> RouteSolution:
    """Route every flow except ``skip`` with closest-to-destination, in index order."""
    from .orchestrator import route_flow, BenchmarkPolicy

    routes = RouteSolution.empty(layout)
    policy = BenchmarkPolicy(HeuristicPolicy("closest-to-destination", cfg.env.neighbors), cfg.env)
    for f in range(layout.num_flows):
        if f != skip:
            routes.set_route(f, route_flow(policy, layout, routes, f).route)
    return routes


@dataclass
class TrainingResult:
    model: DuelingQNet
    episodes: int
    wall_time: float
    metrics_path: Path | None


def run_training(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    resume: DuelingQNet | None = None,
    progress_every: int = 1000,
) -> TrainingResult:
    """Train an agent following ``cfg.training``; writes checkpoints and a metrics CSV to ``out_dir``."""
    tcfg, acfg = cfg.training, cfg.agent
    seed = tcfg.seed
    if resume is not None:
        model = resume
    else:
        model = DuelingQNet(cfg.env.neighbors, acfg, rng=make_rng(seed, STREAM_INIT))
    start = model.episode
    buffer = ReplayBuffer(tcfg.replay_capacity, model.input_dim, make_rng(seed, STREAM_REPLAY, start))
    explore_rng = make_rng(seed, STREAM_EXPLORE, start)
    total = sum(tcfg.phases)
    out = Path(out_dir) if out_dir is not None else None
    writer = fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_path = out / "metrics.csv"
        kept = []
        if start and metrics_path.exists():
            # drop rows past the resume point so steps stay strictly increasing
            with open(metrics_path, newline="") as old:
                kept = [row for row in csv.reader(old)][1:]
            kept = [row for row in kept if row and int(row[0]) <= start]
        fh = open(metrics_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        writer.writerows(kept)
    else:
        metrics_path = None

    t0 = time.perf_counter()
    last_flow = cfg.layout.num_flows - 1
    try:
        for ep in range(start, total):
            _, eps = epsilon_schedule(ep, cfg)
            layout = generate_layout(cfg.layout, training_layout_seed(seed, ep), cfg.constants)
            routes = heuristic_background(layout, cfg, skip=last_flow)
            episode = explore_episode(model if eps < 1 else None, layout, routes, last_flow, eps, explore_rng, cfg)
            buffer.extend(episode.transitions)
            loss = float("nan")
            if len(buffer) >= acfg.batch_size:
                for _ in range(tcfg.steps_per_episode):
                    loss = model.train_batch(*buffer.sample(acfg.batch_size))
            model.episode = ep + 1
            if writer is not None:
                targets = [t.target for t in episode.transitions]
                writer.writerow((
                    ep + 1, f"{eps:.6f}", f"{loss:.6g}",
                    f"{np.mean(targets) if targets else 0.0:.6g}",
                    episode.route.num_hops if episode.route else 0, episode.reprobes,
                ))
            if out is not None and (ep + 1) % tcfg.checkpoint_every == 0:
                model.save(out / f"checkpoint_{ep + 1:07d}.npz")
                model.save(out / "checkpoint.npz")
            if progress_every and (ep + 1) % progress_every == 0:
                log.info("episode %d/%d eps=%.3f loss=%.4g buffer=%d %.1fs",
                         ep + 1, total, eps, loss, len(buffer), time.perf_counter() - t0)
    finally:
        if fh is not None:
            fh.close()
    if out is not None:
        model.save(out / "checkpoint.npz")
    return TrainingResult(model, total - start, time.perf_counter() - t0, metrics_path)


def config_key(cfg: RunConfig) -> str:
    """Short digest of every setting that influences a trained model."""
    from .config import config_to_dict

    doc = config_to_dict(cfg)
    doc.pop("eval", None)
    doc.pop("output_dir", None)
    blob = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def train_or_load(cfg: RunConfig, cache_root: str | Path, progress_every: int = 0) -> DuelingQNet:
    """Reuse a finished run under ``cache_root/<config key>`` or train one there.

    A partially trained checkpoint in that directory is resumed.
    """
    from .config import dump_config

    out = Path(cache_root) / config_key(cfg)
    ckpt = out / "checkpoint.npz"
    total = sum(cfg.training.phases)
    resume = None
    if ckpt.exists():
        model = DuelingQNet.load(ckpt, expect_neighbors=cfg.env.neighbors)
        if model.episode >= total:
            return model
        resume = model
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")
    return run_training(cfg, out, resume=resume, progress_every=progress_every).model
