"""Ground-truth unicycle dynamics, waypoint control and lattice initialization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angles import wrap_angle


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @classmethod
    def from_array(cls, a) -> "RobotState":
        return cls(float(a[0]), float(a[1]), wrap_angle(float(a[2])))


@dataclass(frozen=True)
class ControlInput:
    v: float
    omega: float


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    arrival_tolerance: float = 0.02

    def __post_init__(self):
        if not self.arrival_tolerance > 0:
            raise ValueError("arrival_tolerance must be positive")


@dataclass(frozen=True)
class ControlLimits:
    v_max: float = 0.2
    omega_max: float = 2.0


def unicycle(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Euler step of the unicycle model on stacked states.

    ``x`` has shape (..., 3) and ``u`` shape (..., 2) (broadcastable).
    Heading is wrapped to (-pi, pi].
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    th = x[..., 2]
    v = u[..., 0]
    out = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (3,)))
    out[..., 0] = x[..., 0] + v * np.cos(th) * dt
    out[..., 1] = x[..., 1] + v * np.sin(th) * dt
    out[..., 2] = wrap_angle(th + u[..., 1] * dt)
    return out


def unicycle_jacobian(x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """d unicycle / d x, shape (..., 3, 3)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    th = x[..., 2]
    v = u[..., 0]
    shape = np.broadcast_shapes(th.shape, v.shape)
    F = np.zeros(shape + (3, 3))
    F[..., 0, 0] = 1.0
    F[..., 1, 1] = 1.0
    F[..., 2, 2] = 1.0
    F[..., 0, 2] = -v * np.sin(th) * dt
    F[..., 1, 2] = v * np.cos(th) * dt
    return F


def step_unicycle(state: RobotState, u: ControlInput, dt: float) -> RobotState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = unicycle(state.as_array(), np.array([u.v, u.omega]), dt)
    return RobotState(float(x[0]), float(x[1]), float(x[2]))


def leader_follower_control(
    state: RobotState,
    target: Waypoint,
    gains: tuple[float, float],
    limits: ControlLimits = ControlLimits(),
) -> ControlInput:
    """Proportional go-to-point controller used by both leader and followers."""
    k_v, k_omega = gains
    if k_v <= 0 or k_omega <= 0:
        raise ValueError("gains must be positive")
    dx = target.x - state.x
    dy = target.y - state.y
    dist = math.hypot(dx, dy)
    if dist <= target.arrival_tolerance:
        return ControlInput(0.0, 0.0)
    err = wrap_angle(math.atan2(dy, dx) - state.theta)
    v = min(k_v * dist, limits.v_max)
    omega = float(np.clip(k_omega * err, -limits.omega_max, limits.omega_max))
    return ControlInput(v, omega)


def lattice_shape(n: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    return cols, rows


def init_lattice(
    n: int, area: tuple[float, float], min_spacing: float = 0.1
) -> list[RobotState]:
    """Place ``n`` robots row by row on a square grid centered in ``area``.

    The grid has ceil(sqrt(n)) columns; spacing is the same along both axes,
    ``min(width/(cols+1), height/(rows+1))``. Headings start at zero.
    """
    width, height = area
    if n < 1:
        raise ValueError("need at least one robot")
    if width <= 0 or height <= 0:
        raise ValueError("area must be positive")
    cols, rows = lattice_shape(n)
    spacing = min(width / (cols + 1), height / (rows + 1))
    if spacing < min_spacing:
        raise ValueError(
            f"{n} robots do not fit in {width}x{height} at spacing >= {min_spacing}"
        )
    x0 = width / 2 - spacing * (cols - 1) / 2
    y0 = height / 2 - spacing * (rows - 1) / 2
    out = []
    for k in range(n):
        r, c = divmod(k, cols)
        out.append(RobotState(x0 + c * spacing, y0 + r * spacing, 0.0))
    return out
