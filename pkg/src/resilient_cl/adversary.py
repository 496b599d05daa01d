"""Sensing and communication danger zones.

A zone is a disc whose attack probability peaks at the center and decays
linearly to zero at the rim. Sensing zones corrupt range-bearing
measurements with a fixed-magnitude bias; communication zones drop links.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .angles import wrap_angle
from .sensing import RelativeMeasurement

SENSING = "sensing"
COMMUNICATION = "communication"


@dataclass(frozen=True)
class DangerZone:
    kind: Literal["sensing", "communication"]
    center: tuple[float, float]
    radius: float
    peak_rate: float
    threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in (SENSING, COMMUNICATION):
            raise ValueError(f"unknown zone kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("zone radius must be positive")
        if not 0.0 <= self.peak_rate <= 1.0:
            raise ValueError("peak_rate must lie in [0, 1]")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")

    def contains(self, p) -> bool:
        """Membership in the zone as a set: risk at ``p`` reaches the threshold."""
        return risk_at(self, p) >= self.threshold


@dataclass(frozen=True)
class AttackOutcome:
    injected_bias: tuple[float, float] | None
    dropped: bool


def risk_at(zone: DangerZone, p) -> float:
    d = math.hypot(p[0] - zone.center[0], p[1] - zone.center[1])
    return zone.peak_rate * max(0.0, 1.0 - d / zone.radius)


def zone_rates(zones, kind: str, positions: np.ndarray) -> np.ndarray:
    """Per-robot max risk over the zones of ``kind``; shape (n,)."""
    p = np.asarray(positions, dtype=float)[..., :2]
    sel = [z for z in zones if z.kind == kind]
    if not sel:
        return np.zeros(len(p))
    c = np.array([z.center for z in sel], dtype=float)
    r = np.array([z.radius for z in sel])
    peak = np.array([z.peak_rate for z in sel])
    d = np.hypot(p[:, None, 0] - c[:, 0], p[:, None, 1] - c[:, 1])
    return np.max(peak * np.maximum(0.0, 1.0 - d / r), axis=1)


def zone_rate_for_robot(zones, kind: str, p) -> float:
    return max((risk_at(z, p) for z in zones if z.kind == kind), default=0.0)


def max_rate(zones, kind: str) -> float:
    return max((z.peak_rate for z in zones if z.kind == kind), default=0.0)


def attack_arrays(z: np.ndarray, rate: np.ndarray, magnitude, u: np.ndarray, signs: np.ndarray):
    """Vectorized injection.

    ``u`` holds one uniform draw per measurement and ``signs`` one pair of
    uniform draws per measurement. Returns the corrupted copy of ``z`` and the
    boolean mask of compromised measurements.
    """
    hit = u < rate
    bias = np.where(signs < 0.5, -1.0, 1.0) * np.asarray(magnitude, dtype=float)
    out = z.copy()
    out[hit] += bias[hit]
    out[:, 0] = np.abs(out[:, 0])
    out[:, 1] = wrap_angle(out[:, 1])
    return out, hit


def attack_measurement(
    m: RelativeMeasurement,
    rate: float,
    magnitude: tuple[float, float],
    rng: np.random.Generator,
) -> RelativeMeasurement:
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    u = rng.random()
    signs = rng.random(2)
    if not u < rate:
        return m
    dr = magnitude[0] if signs[0] >= 0.5 else -magnitude[0]
    db = magnitude[1] if signs[1] >= 0.5 else -magnitude[1]
    return replace(
        m,
        range=abs(m.range + dr),
        bearing=wrap_angle(m.bearing + db),
        compromised_flag_hidden=True,
    )


def comm_available(rate: float, rng: np.random.Generator) -> bool:
    """Sample the link indicator: False (dropped) with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    return not rng.random() < rate
