"""Run configuration: dataclass sections with JSON load/dump.

Defaults reproduce the 500 m x 500 m, F=3, B=8 simulation setup. Loading
validates every field and rejects unknown keys.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration values."""


@dataclass(frozen=True)
class PhysicalConstants:
    carrier_frequency: float = 2.4e9  # Hz
    bandwidth_per_band: float = 5e6  # Hz
    tx_power: float = 1.0  # W (30 dBm)
    noise_psd: float = 1e-16  # W/Hz (-130 dBm/Hz)
    antenna_height: float = 1.5  # m
    antenna_gain: float = 2.5  # dBi

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not v > 0:
                raise ConfigError(f"{f.name} must be strictly positive, got {v!r}")

    @property
    def noise_power(self) -> float:
        """Per-band background noise power in W."""
        return self.noise_psd * self.bandwidth_per_band


@dataclass(frozen=True)
class LayoutConfig:
    region_side: float = 500.0
    grid_counts: tuple[int, ...] = (6, 8, 7, 6, 5, 10, 8, 9, 6)
    num_flows: int = 3
    num_bands: int = 8
    # source/destination separation as a fraction of region_side
    min_endpoint_separation: float = 0.5

    def __post_init__(self):
        if not self.region_side > 0:
            raise ConfigError("region_side must be positive")
        if len(self.grid_counts) != 9 or any(n < 0 for n in self.grid_counts):
            raise ConfigError("grid_counts must be 9 non-negative counts (3x3 grid)")
        if sum(self.grid_counts) < 1:
            raise ConfigError("layout needs at least one relay")
        if self.num_flows < 1:
            raise ConfigError("num_flows must be >= 1")
        if self.num_bands < 1:
            raise ConfigError("num_bands must be >= 1")
        if not 0 <= self.min_endpoint_separation < 2 ** 0.5:
            raise ConfigError("min_endpoint_separation must lie in [0, sqrt(2))")


@dataclass(frozen=True)
class EnvConfig:
    neighbors: int = 10  # c, candidate window size
    max_hops: int = 50
    max_reprobes: int = 10  # consecutive reprobes at one frontier

    def __post_init__(self):
        if self.neighbors < 1 or self.max_hops < 1 or self.max_reprobes < 0:
            raise ConfigError("neighbors/max_hops must be >= 1 and max_reprobes >= 0")


@dataclass(frozen=True)
class AgentConfig:
    trunk_units: tuple[int, ...] = (150, 150)
    head_units: int = 100
    optimizer: str = "sgd"  # "sgd" (with momentum) or "adam"
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 128

    def __post_init__(self):
        if not self.trunk_units or any(u < 1 for u in self.trunk_units) or self.head_units < 1:
            raise ConfigError("layer widths must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0 or not 0 <= self.momentum < 1 or self.batch_size < 1:
            raise ConfigError("bad optimizer hyper-parameters")


@dataclass(frozen=True)
class TrainingConfig:
    # layouts per phase: random fill, epsilon-greedy, extended (epsilon = 0)
    phases: tuple[int, int, int] = (2000, 25000, 3000)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    discount: float = 1.0  # lambda, hop-count penalty
    bias: float = 40.0  # dB added to bottleneck SINR
    replay_capacity: int = 1_000_000
    steps_per_episode: int = 1
    checkpoint_every: int = 5000  # episodes
    seed: int = 0

    def __post_init__(self):
        if len(self.phases) != 3 or any(p < 0 for p in self.phases):
            raise ConfigError("phases must be three non-negative layout counts")
        if not (0 <= self.epsilon_end <= self.epsilon_start <= 1):
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0 < self.discount <= 1:
            raise ConfigError("discount (lambda) must lie in (0, 1]")
        if self.replay_capacity < 1 or self.steps_per_episode < 0 or self.checkpoint_every < 1:
            raise ConfigError("bad replay/step settings")


@dataclass(frozen=True)
class EvalConfig:
    rounds: int = 2
    num_layouts: int = 500
    seed: int = 1_000_003
    fairness: bool = True

    def __post_init__(self):
        if self.rounds < 1 or self.num_layouts < 0:
            raise ConfigError("rounds must be >= 1 and num_layouts >= 0")


@dataclass(frozen=True)
class RunConfig:
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs/default"

    def replace(self, **sections) -> "RunConfig":
        """Return a copy with some fields overridden.

        Keys are either top-level fields or ``"section.field"`` paths, e.g.
        ``cfg.replace(**{"layout.num_bands": 4})``.
        """
        top: dict[str, Any] = {}
        nested: dict[str, dict[str, Any]] = {}
        for key, value in sections.items():
            if "." in key:
                sec, name = key.split(".", 1)
                nested.setdefault(sec, {})[name] = value
            else:
                top[key] = value
        for sec, changes in nested.items():
            top[sec] = dataclasses.replace(getattr(self, sec), **changes)
        return dataclasses.replace(self, **top)


def large_scale_config() -> RunConfig:
    """The 5000 m x 5000 m, F=10, B=32 generalization setting."""
    return RunConfig(
        layout=LayoutConfig(
            region_side=5000.0,
            grid_counts=(19, 16, 21, 18, 14, 24, 17, 20, 19),
            num_flows=10,
            num_bands=32,
        )
    )


def full_scale_config() -> RunConfig:
    return RunConfig(training=TrainingConfig(phases=(20000, 250000, 20000)))


def _from_dict(cls, data: dict[str, Any], path: str = ""):
    if not isinstance(data, dict):
        raise ConfigError(f"section {path or '<root>'} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {path or '<root>'}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        default = getattr(cls(), name) if name in known else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _from_dict(type(default), value, f"{path}{name}.")
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{path}{name} must be a list")
            kwargs[name] = tuple(value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{path}{name} must be a boolean")
            kwargs[name] = value
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
                raise ConfigError(f"{path}{name} must be an integer")
            kwargs[name] = int(value)
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{path}{name} must be a number")
            kwargs[name] = float(value)
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(f"{path}{name} must be a string")
            kwargs[name] = value
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    return _from_dict(RunConfig, data)


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def load_config(path: str | Path) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg: RunConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")
