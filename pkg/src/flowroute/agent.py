"""Dueling deep-Q network in plain numpy.

One network scores the ``c + 1`` actions of a single band; the same weights
are applied to every band's state vector and the best (band, action) pair is
picked from the resulting ``B x (c + 1)`` surface.
"""
from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .config import AgentConfig

CHECKPOINT_VERSION = 1


class TrainingFault(RuntimeError):
    """Non-finite loss or parameters during an update."""


class CheckpointMismatch(ValueError):
    """Checkpoint is incompatible with the requested configuration."""


def aggregate(value: np.ndarray, advantage: np.ndarray) -> np.ndarray:
    """Q = V + A - mean_a A."""
    return value + advantage - advantage.mean(axis=-1, keepdims=True)


class DuelingQNet:
    """Trunk of ReLU layers feeding a value head and an advantage head."""

    def __init__(self, num_neighbors: int, cfg: AgentConfig | None = None, rng: np.random.Generator | None = None):
        self.cfg = cfg or AgentConfig()
        self.c = int(num_neighbors)
        self.input_dim = 4 * self.c
        self.num_actions = self.c + 1
        self.step = 0  # optimizer updates
        self.episode = 0  # training episodes consumed
        rng = rng or np.random.default_rng(0)
        self.params: dict[str, np.ndarray] = {}
        width = self.input_dim
        for i, units in enumerate(self.cfg.trunk_units):
            self._init_layer(f"trunk{i}", width, units, rng)
            width = units
        self._init_layer("value0", width, self.cfg.head_units, rng)
        self._init_layer("value1", self.cfg.head_units, 1, rng)
        self._init_layer("adv0", width, self.cfg.head_units, rng)
        self._init_layer("adv1", self.cfg.head_units, self.num_actions, rng)
        self._opt_state: dict[str, np.ndarray] = {}

    def _init_layer(self, name: str, fan_in: int, fan_out: int, rng: np.random.Generator) -> None:
        limit = np.sqrt(6.0 / fan_in)
        self.params[f"{name}.W"] = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        self.params[f"{name}.b"] = np.zeros(fan_out)

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def _trunk_names(self) -> list[str]:
        return [f"trunk{i}" for i in range(len(self.cfg.trunk_units))]

    # ------------------------------------------------------------ forward

    def _forward(self, x: np.ndarray):
        p = self.params
        hs, zs = [x], []
        h = x
        for name in self._trunk_names():
            z = h @ p[f"{name}.W"] + p[f"{name}.b"]
            h = np.maximum(z, 0.0)
            zs.append(z)
            hs.append(h)
        zv = h @ p["value0.W"] + p["value0.b"]
        hv = np.maximum(zv, 0.0)
        value = hv @ p["value1.W"] + p["value1.b"]
        za = h @ p["adv0.W"] + p["adv0.b"]
        ha = np.maximum(za, 0.0)
        adv = ha @ p["adv1.W"] + p["adv1.b"]
        return aggregate(value, adv), (hs, zs, zv, hv, za, ha)

    def forward(self, states: np.ndarray) -> np.ndarray:
        """Q estimates for one state (shape (4c,)) or a batch (shape (n, 4c))."""
        x = np.asarray(states, dtype=float)
        if x.shape[-1] != self.input_dim or x.ndim not in (1, 2):
            raise ValueError(f"expected state width {self.input_dim}, got shape {x.shape}")
        q, _ = self._forward(np.atleast_2d(x))
        return q[0] if x.ndim == 1 else q

    __call__ = forward

    # ------------------------------------------------------------ gradients

    def loss_and_grads(self, states: np.ndarray, actions: np.ndarray, targets: np.ndarray):
        """MSE on the taken actions only, with gradients for every parameter."""
        p = self.params
        x = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        n = len(x)
        q, (hs, zs, zv, hv, za, ha) = self._forward(x)
        rows = np.arange(n)
        err = q[rows, actions] - targets
        loss = float(np.mean(err ** 2))

        dq = np.zeros_like(q)
        dq[rows, actions] = 2.0 * err / n
        dvalue = dq.sum(axis=1, keepdims=True)
        dadv = dq - dq.mean(axis=1, keepdims=True)

        g: dict[str, np.ndarray] = {}
        h = hs[-1]
        g["value1.W"] = hv.T @ dvalue
        g["value1.b"] = dvalue.sum(axis=0)
        dzv = (dvalue @ p["value1.W"].T) * (zv > 0)
        g["value0.W"] = h.T @ dzv
        g["value0.b"] = dzv.sum(axis=0)
        g["adv1.W"] = ha.T @ dadv
        g["adv1.b"] = dadv.sum(axis=0)
        dza = (dadv @ p["adv1.W"].T) * (za > 0)
        g["adv0.W"] = h.T @ dza
        g["adv0.b"] = dza.sum(axis=0)
        dh = dzv @ p["value0.W"].T + dza @ p["adv0.W"].T
        names = self._trunk_names()
        for i in reversed(range(len(names))):
            dz = dh * (zs[i] > 0)
            g[f"{names[i]}.W"] = hs[i].T @ dz
            g[f"{names[i]}.b"] = dz.sum(axis=0)
            if i:
                dh = dz @ p[f"{names[i]}.W"].T
        return loss, g

    def train_batch(self, states, actions, targets, learning_rate: float | None = None) -> float:
        """One optimizer step; returns the loss before the step."""
        if len(states) == 0:
            raise ValueError("train_batch needs a non-empty batch")
        with np.errstate(invalid="ignore", over="ignore"):
            loss, grads = self.loss_and_grads(states, actions, targets)
        if not np.isfinite(loss):
            raise TrainingFault(f"non-finite loss {loss} at step {self.step}")
        lr = self.cfg.learning_rate if learning_rate is None else learning_rate
        self.step += 1
        if self.cfg.optimizer == "adam":
            self._adam(grads, lr)
        else:
            self._sgd(grads, lr)
        return loss

    def _sgd(self, grads, lr):
        mu = self.cfg.momentum
        for k, grad in grads.items():
            v = self._opt_state.get(k)
            v = -lr * grad if v is None else mu * v - lr * grad
            self._opt_state[k] = v
            self.params[k] += v

    def _adam(self, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
        t = self.step
        for k, grad in grads.items():
            m = self._opt_state.get(k + ".m", np.zeros_like(grad))
            s = self._opt_state.get(k + ".v", np.zeros_like(grad))
            m = b1 * m + (1 - b1) * grad
            s = b2 * s + (1 - b2) * grad * grad
            self._opt_state[k + ".m"], self._opt_state[k + ".v"] = m, s
            self.params[k] -= lr * (m / (1 - b1 ** t)) / (np.sqrt(s / (1 - b2 ** t)) + eps)

    # ------------------------------------------------------------ persistence

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v for k, v in self.params.items()}
        out.update({f"opt/{k}": v for k, v in self._opt_state.items()})
        meta = {
            "version": CHECKPOINT_VERSION,
            "neighbors": self.c,
            "input_dim": self.input_dim,
            "step": self.step,
            "episode": self.episode,
            "config": {
                "trunk_units": list(self.cfg.trunk_units),
                "head_units": self.cfg.head_units,
                "optimizer": self.cfg.optimizer,
                "learning_rate": self.cfg.learning_rate,
                "momentum": self.cfg.momentum,
                "batch_size": self.cfg.batch_size,
            },
            "shapes": {k: list(v.shape) for k, v in self.params.items()},
        }
        out["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        return out

    def save(self, path: str | Path) -> None:
        buf = io.BytesIO()
        np.savez(buf, **self.state_dict())
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path, expect_neighbors: int | None = None) -> "DuelingQNet":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise CheckpointMismatch(f"checkpoint version {meta.get('version')} != {CHECKPOINT_VERSION}")
            if expect_neighbors is not None and meta["neighbors"] != expect_neighbors:
                raise CheckpointMismatch(
                    f"checkpoint built for c={meta['neighbors']} (width {meta['input_dim']}), "
                    f"config asks for c={expect_neighbors}"
                )
            cfg_d = dict(meta["config"])
            cfg_d["trunk_units"] = tuple(cfg_d["trunk_units"])
            net = cls(meta["neighbors"], AgentConfig(**cfg_d))
            for k in net.params:
                arr = data[f"param/{k}"]
                if list(arr.shape) != meta["shapes"][k]:
                    raise CheckpointMismatch(f"shape mismatch for {k}")
                net.params[k] = arr.copy()
            net._opt_state = {k[4:]: data[k].copy() for k in data.files if k.startswith("opt/")}
            net.step = int(meta["step"])
            net.episode = int(meta.get("episode", 0))
        return net


def q_surface(model: DuelingQNet, band_states: np.ndarray) -> np.ndarray:
    """B x (c + 1) matrix of Q estimates, one row per band."""
    return model.forward(np.atleast_2d(band_states))


def argmax_masked(q: np.ndarray, mask: np.ndarray) -> tuple[int, int] | None:
    """Best eligible (band, action) of a Q surface; ties go to the lower band, then lower action.

    Returns None when every entry is masked.
    """
    if not mask.any():
        return None
    masked = np.where(mask, q, -np.inf)
    flat = int(np.argmax(masked))
    band, action = divmod(flat, q.shape[1])
    return band, action


def select_joint(model: DuelingQNet, band_states: np.ndarray, mask: np.ndarray) -> tuple[int, int] | None:
    """Greedy (band, action) for the per-band states; action ``c`` means reprobe."""
    return argmax_masked(q_surface(model, band_states), mask)
