"""Deterministic line-of-sight two-slope pathloss (ITU-R P.1411 style).

Channels depend on geometry only: no fading, no shadowing, and the same
gain applies on every frequency band.
"""
from __future__ import annotations

import math

import numpy as np

from .config import PhysicalConstants

SPEED_OF_LIGHT = 299_792_458.0
MIN_DISTANCE = 1.0  # m, clamp for the d -> 0 singularity


def wavelength(constants: PhysicalConstants) -> float:
    return SPEED_OF_LIGHT / constants.carrier_frequency


def breakpoint_distance(constants: PhysicalConstants) -> float:
    """R_bp = 4 h_b h_m / lambda."""
    h = constants.antenna_height
    return 4.0 * h * h / wavelength(constants)


def breakpoint_loss(constants: PhysicalConstants) -> float:
    """Basic transmission loss at the breakpoint, |20 log10(lambda^2 / (8 pi h_b h_m))|."""
    h = constants.antenna_height
    lam = wavelength(constants)
    return abs(20.0 * math.log10(lam * lam / (8.0 * math.pi * h * h)))


def pathloss_db(distance, constants: PhysicalConstants):
    """Total loss in dB between two antennas, antenna gains included.

    Accepts a scalar or an array of distances (metres). Below the breakpoint
    the loss grows 20 dB/decade, above it 40 dB/decade; both branches give
    ``L_bp + 6`` at the breakpoint itself.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("pathloss_db requires strictly positive distances")
    rbp = breakpoint_distance(constants)
    base = breakpoint_loss(constants) + 6.0
    slope = np.where(d <= rbp, 20.0, 40.0)
    loss = base + slope * np.log10(d / rbp) - 2.0 * constants.antenna_gain
    return float(loss) if loss.ndim == 0 else loss


def gain_from_distance(distance, constants: PhysicalConstants):
    """Linear power gain |h|^2 with the 1 m minimum-distance clamp."""
    d = np.maximum(np.asarray(distance, dtype=float), MIN_DISTANCE)
    g = 10.0 ** (-np.asarray(pathloss_db(d, constants)) / 10.0)
    return float(g) if g.ndim == 0 else g


def channel_gain(tx_pos, rx_pos, constants: PhysicalConstants) -> float:
    tx = np.asarray(tx_pos, dtype=float)
    rx = np.asarray(rx_pos, dtype=float)
    if np.array_equal(tx, rx):
        raise ValueError("channel_gain: transmitter and receiver coincide")
    return gain_from_distance(float(np.hypot(*(tx - rx))), constants)


def gain_matrix(positions: np.ndarray, constants: PhysicalConstants) -> np.ndarray:
    """Pairwise gains for an (n, 2) position array; the diagonal is zero."""
    pos = np.asarray(positions, dtype=float)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    g = gain_from_distance(np.where(dist > 0, dist, MIN_DISTANCE), constants)
    np.fill_diagonal(g, 0.0)
    return g
