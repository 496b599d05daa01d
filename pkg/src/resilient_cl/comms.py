"""Adaptive event-triggered communication and the residual attack gate.

For every sensing link (i, j) the observer i computes the innovation of its
measurement of j against its prior. The link is processed in a fixed order:

1. attack gate: drop the measurement if the innovation norm exceeds ``rho``;
2. adaptive threshold from connectivity, innovation size and i's zone rates;
3. trigger when the innovation norm is strictly above the threshold;
4. the link must also be up (not dropped by a communication zone);
5. only then is the measurement fused.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .adversary import COMMUNICATION, SENSING, comm_available, zone_rate_for_robot
from .angles import wrap_angle
from .filters import Estimate, apply_update, effective_noise
from .graph import LAMBDA2_EPS, CommGraph

EVENT = "event_triggered"
ALWAYS = "always"
PERIODIC = "periodic"
COMM_MODES = (EVENT, ALWAYS, PERIODIC)

# variance floor so a noiseless channel can still be whitened
WHITEN_FLOOR = 1e-18


class Gate(enum.Enum):
    ACCEPT = "accept"
    DISCARD = "discard"


@dataclass(frozen=True)
class TriggerConfig:
    alpha: float = 0.5
    gamma: float = 0.0
    zeta_s: float = 0.5
    zeta_c: float = 0.5
    rho: float = 50.0
    norm: Literal["whitened", "euclidean"] = "whitened"
    lambda2_scope: Literal["global", "local"] = "global"

    def violations(self, max_ds: float = 1.0, max_dc: float = 1.0) -> list[str]:
        out = []
        if not self.alpha > 0:
            out.append("trigger.alpha must be positive")
        if not self.gamma >= 0:
            out.append("trigger.gamma must be non-negative")
        for name in ("zeta_s", "zeta_c"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                out.append(f"trigger.{name} must lie in [0, 1]")
        if not self.rho > 0:
            out.append("trigger.rho must be positive")
        if self.norm not in ("whitened", "euclidean"):
            out.append(f"trigger.norm must be 'whitened' or 'euclidean', got {self.norm!r}")
        if self.lambda2_scope not in ("global", "local"):
            out.append(f"trigger.lambda2_scope must be 'global' or 'local', got {self.lambda2_scope!r}")
        worst = self.zeta_s * max_ds + self.zeta_c * max_dc
        if worst > 1.0 + 1e-12:
            out.append(
                "adaptive-threshold nonnegativity violated: "
                f"zeta_s*Ds + zeta_c*Dc reaches {worst:.3g} > 1 with the configured zones"
            )
        return out


@dataclass(frozen=True)
class LinkDecision:
    link: tuple[int, int]
    innovation_norm: float
    threshold: float
    triggered: bool
    attack_flagged: bool
    sigma: bool
    fused: bool = False
    compromised: bool = False


@dataclass(frozen=True, eq=False)
class GraphState:
    graph: CommGraph
    lambda2: float


def innovation(z, z_hat) -> np.ndarray:
    z = z.z if hasattr(z, "z") else np.asarray(z, dtype=float)
    d = np.asarray(z, dtype=float) - np.asarray(z_hat, dtype=float)
    d[..., 1] = wrap_angle(d[..., 1])
    return d


def whitening(R, kind: str = "whitened") -> np.ndarray:
    """Matrix W so that the norm is sqrt(L^T W L)."""
    R = np.asarray(R, dtype=float)
    d = R.shape[-1]
    if kind == "euclidean":
        return np.eye(d)
    return np.linalg.inv(R + WHITEN_FLOOR * np.eye(d)) / d


def innovation_norm(innov, W) -> np.ndarray:
    innov = np.asarray(innov, dtype=float)
    q = np.einsum("...i,ij,...j->...", innov, W, innov)
    return np.sqrt(np.maximum(q, 0.0))


def adaptive_threshold(cfg: TriggerConfig, lambda2, innovation_norm, Ds, Dc):
    lam = np.maximum(lambda2, LAMBDA2_EPS)
    out = (cfg.alpha / lam) * (1.0 + cfg.gamma * np.asarray(innovation_norm)) * (
        1.0 - cfg.zeta_s * np.asarray(Ds) - cfg.zeta_c * np.asarray(Dc)
    )
    return float(out) if np.ndim(out) == 0 else out


def attack_gate(innov, rho: float, R=None, norm: str = "whitened") -> Gate:
    """Discard when the innovation norm is strictly above ``rho``.

    Without ``R`` the plain Euclidean norm is used.
    """
    W = np.eye(len(innov)) if R is None else whitening(R, norm)
    return Gate.DISCARD if innovation_norm(innov, W) > rho else Gate.ACCEPT


def periodic_fires(rate: float, step, i, j):
    """Deterministic schedule that fires a fraction ``rate`` of steps per link.

    Each link gets a fixed phase so links do not all fire on the same step.
    """
    phase = np.mod(np.asarray(i) * 0.6180339887498949 + np.asarray(j) * 0.41421356237309515, 1.0)
    return np.floor(step * rate + phase) != np.floor((step - 1) * rate + phase)


def trigger_mask(mode: str, norm, delta, *, rate: float = 1.0, step=0, i=0, j=0):
    if mode == EVENT:
        return np.asarray(norm) > np.asarray(delta)
    if mode == ALWAYS:
        return np.ones(np.shape(norm), dtype=bool)
    if mode == PERIODIC:
        return np.broadcast_to(periodic_fires(rate, step, i, j), np.shape(norm)).copy()
    raise ValueError(f"unknown comm mode {mode!r}")


def process_link(
    i: int,
    j: int,
    est_i: Estimate,
    broadcast_j: Estimate,
    z,
    cfg: TriggerConfig,
    graph_state: GraphState,
    zones,
    *,
    flt,
    R,
    position,
    rng: np.random.Generator | None = None,
    sigma: bool | None = None,
    mode: str = EVENT,
    periodic_rate: float = 1.0,
    step: int = 0,
    neighbor_uncertainty: str = "inflate",
) -> tuple[LinkDecision, Estimate | None]:
    """Run one sensing link through gate, trigger and fusion.

    ``position`` is the observer's true position, used for its zone rates.
    ``sigma`` may be supplied to force the link state; otherwise it is sampled
    from the communication-zone rate with ``rng``.
    """
    if not graph_state.graph.adjacency[i, j]:
        raise ValueError(f"({i}, {j}) is not an edge of the current graph")
    model = flt.model
    ctx = broadcast_j.mean
    Pj = broadcast_j.cov if neighbor_uncertainty == "inflate" else None
    R_eff = effective_noise(model, R, ctx, Pj, est_i.mean)
    z_vec = z.z if hasattr(z, "z") else np.asarray(z, dtype=float)
    z_hat, Pzz, Pxz, bad = flt.predict_measurement(est_i.mean, est_i.cov, ctx, R_eff)
    lam = innovation(z_vec, z_hat)
    W = whitening(R, cfg.norm)
    nrm = float(innovation_norm(lam, W))
    compromised = bool(getattr(z, "compromised_flag_hidden", False))

    Ds = zone_rate_for_robot(zones, SENSING, position)
    Dc = zone_rate_for_robot(zones, COMMUNICATION, position)
    delta = adaptive_threshold(cfg, graph_state.lambda2, nrm, Ds, Dc) if mode == EVENT else -np.inf

    if sigma is None:
        if rng is None:
            raise ValueError("either sigma or rng is required")
        sigma = comm_available(Dc, rng)

    if nrm > cfg.rho:
        return LinkDecision((i, j), nrm, delta, False, True, bool(sigma), False, compromised), None

    triggered = bool(trigger_mask(mode, nrm, delta, rate=periodic_rate, step=step, i=i, j=j))
    if not (triggered and sigma) or bad:
        return LinkDecision((i, j), nrm, delta, triggered, False, bool(sigma), False, compromised), None
    mean, cov, _, _, ok = apply_update(est_i.mean, est_i.cov, z_vec, z_hat, Pzz, Pxz, model)
    fused = bool(ok)
    decision = LinkDecision((i, j), nrm, delta, triggered, False, bool(sigma), fused, compromised)
    return decision, (Estimate(mean, cov) if fused else None)
