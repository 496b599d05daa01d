"""Range-bearing measurements between robots and the proximity graph they induce."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angles import wrap_angle
from .world import RobotState

# below this separation the bearing is undefined
DEGENERATE_RANGE = 1e-12


@dataclass(frozen=True)
class NoiseConfig:
    sigma_range: float = 0.005
    sigma_bearing: float = 0.05

    def __post_init__(self):
        if self.sigma_range < 0 or self.sigma_bearing < 0:
            raise ValueError("noise standard deviations must be non-negative")

    @property
    def R(self) -> np.ndarray:
        return np.diag([self.sigma_range**2, self.sigma_bearing**2])


@dataclass(frozen=True)
class RelativeMeasurement:
    observer_id: int
    target_id: int
    range: float
    bearing: float
    step: int = 0
    compromised_flag_hidden: bool = False

    def __post_init__(self):
        if self.observer_id == self.target_id:
            raise ValueError("a robot cannot observe itself")
        if not (math.isfinite(self.range) and self.range >= 0):
            raise ValueError("range must be finite and non-negative")

    @property
    def z(self) -> np.ndarray:
        return np.array([self.range, self.bearing])


def range_bearing(xi: np.ndarray, xj: np.ndarray) -> np.ndarray:
    """Vectorized h(xi, xj) -> (..., 2). Coincident positions give (0, 0)."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    dx = xj[..., 0] - xi[..., 0]
    dy = xj[..., 1] - xi[..., 1]
    r = np.hypot(dx, dy)
    b = wrap_angle(np.arctan2(dy, dx) - xi[..., 2])
    b = np.where(r > DEGENERATE_RANGE, b, 0.0)
    return np.stack([r, b], axis=-1)


def range_bearing_jacobians(xi: np.ndarray, xj: np.ndarray):
    """Jacobians of h with respect to the observer and the target, each (..., 2, 3)."""
    xi = np.asarray(xi, dtype=float)
    xj = np.asarray(xj, dtype=float)
    dx = xj[..., 0] - xi[..., 0]
    dy = xj[..., 1] - xi[..., 1]
    r2 = np.maximum(dx * dx + dy * dy, DEGENERATE_RANGE**2)
    r = np.sqrt(r2)
    shape = np.broadcast_shapes(xi.shape[:-1], xj.shape[:-1])
    Hi = np.zeros(shape + (2, 3))
    Hi[..., 0, 0] = -dx / r
    Hi[..., 0, 1] = -dy / r
    Hi[..., 1, 0] = dy / r2
    Hi[..., 1, 1] = -dx / r2
    Hi[..., 1, 2] = -1.0
    Hj = np.zeros(shape + (2, 3))
    Hj[..., 0, :2] = -Hi[..., 0, :2]
    Hj[..., 1, :2] = -Hi[..., 1, :2]
    return Hi, Hj


def h_range_bearing(xi: RobotState, xj: RobotState) -> tuple[float, float, bool]:
    """Return (range, bearing, degenerate) as seen by ``xi``."""
    dx = xj.x - xi.x
    dy = xj.y - xi.y
    r = math.hypot(dx, dy)
    if r <= DEGENERATE_RANGE:
        return 0.0, 0.0, True
    return r, wrap_angle(math.atan2(dy, dx) - xi.theta), False


def adjacency(positions: np.ndarray, radius: float) -> np.ndarray:
    """Boolean n x n proximity matrix (distance <= radius), zero diagonal."""
    p = np.asarray(positions, dtype=float)[:, :2]
    d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    a = d <= radius
    np.fill_diagonal(a, False)
    return a


def sense_arrays(truth: np.ndarray, noise: NoiseConfig, radius: float, rng):
    """Array form of :func:`sense`.

    Returns ``(observer, target, z)`` with ``z`` of shape (m, 2), ordered by
    (observer, target). Noise is drawn for every ordered pair from one
    (n, n, 2) block so a pair's noise does not depend on which other pairs
    happen to be in range.
    """
    n = len(truth)
    noise_block = rng.standard_normal((n, n, 2))
    adj = adjacency(truth, radius)
    obs, tgt = np.nonzero(adj)
    z = range_bearing(truth[obs], truth[tgt])
    z[:, 0] += noise.sigma_range * noise_block[obs, tgt, 0]
    z[:, 1] = wrap_angle(z[:, 1] + noise.sigma_bearing * noise_block[obs, tgt, 1])
    # additive noise can push a short range below zero
    z[:, 0] = np.abs(z[:, 0])
    return obs, tgt, z


def sense(
    world: list[RobotState],
    noise: NoiseConfig,
    radius: float,
    rng: np.random.Generator,
    step: int = 0,
) -> list[RelativeMeasurement]:
    if not radius > 0:
        raise ValueError("sensing radius must be positive")
    truth = np.array([s.as_array() for s in world])
    obs, tgt, z = sense_arrays(truth, noise, radius, rng)
    return [
        RelativeMeasurement(int(i), int(j), float(r), float(b), step)
        for i, j, (r, b) in zip(obs, tgt, z)
    ]
