"""Deterministic experiment loop and localization metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import adversary, comms
from .adversary import DangerZone
from .comms import TriggerConfig
from .filters import ROBOT_MODEL, apply_update, effective_noise, make_filter
from .graph import CommGraph, lambda2 as graph_lambda2, local_lambda2, LAMBDA2_EPS
from .sensing import NoiseConfig, adjacency, sense_arrays
from .world import Waypoint, init_lattice, unicycle, unicycle_jacobian
from .angles import wrap_angle

FILTER_KINDS = ("ckf", "ekf", "ukf")
SWEEP_AXES = ("zone_radius", "rho", "comm_rate", "n_robots")


@dataclass(frozen=True)
class ControlConfig:
    k_v: float = 1.0
    k_omega: float = 2.0
    v_max: float = 0.2
    omega_max: float = 2.0
    leader_speed: float = 0.08
    loop_waypoints: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    n_robots: int = 17
    steps: int = 300
    dt: float = 0.1
    area: tuple[float, float] = (3.0, 3.0)
    sensing_radius: float = 1.0
    noise: NoiseConfig = NoiseConfig()
    zones: tuple[DangerZone, ...] = ()
    trigger: TriggerConfig = TriggerConfig()
    filter_kind: str = "ckf"
    comm_mode: str = comms.EVENT
    periodic_rate: float = 1.0
    seed: int = 0
    waypoints: tuple[Waypoint, ...] = ()
    attack_magnitude: tuple[float, float] = (0.3, 0.3)
    process_noise: tuple[float, float, float] = (1e-6, 1e-6, 1e-5)
    init_sigma: tuple[float, float, float] = (0.05, 0.05, 0.05)
    control: ControlConfig = ControlConfig()
    leader: int | None = None
    neighbor_uncertainty: str = "inflate"
    ukf_alpha: float = 1e-3
    ukf_beta: float = 2.0
    ukf_kappa: float = 0.0

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.process_noise)


@dataclass(frozen=True)
class StepRecord:
    step: int
    msle: float
    comm_rate: float
    lambda2: float
    per_robot_error: tuple[float, ...]
    discarded_count: int
    dropped_count: int
    triggered_count: int = 0
    transmitted_count: int = 0
    eligible_count: int = 0
    fused_count: int = 0
    false_discard_count: int = 0
    abs_mse: float = 0.0
    diverged: tuple[int, ...] = ()


@dataclass
class LinkLog:
    """Per-link outcome arrays for one step, aligned by index."""

    observer: np.ndarray
    target: np.ndarray
    innovation_norm: np.ndarray
    threshold: np.ndarray
    triggered: np.ndarray
    attack_flagged: np.ndarray
    sigma: np.ndarray
    fused: np.ndarray
    compromised: np.ndarray


@dataclass
class StepTrace:
    step: int
    truth: np.ndarray
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    post_mean: np.ndarray
    post_cov: np.ndarray
    links: LinkLog


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[StepRecord]
    links: list[LinkLog] = field(default_factory=list)

    @property
    def comm_rate(self) -> float:
        """Run-level rate: transmissions over eligible link-steps."""
        elig = sum(r.eligible_count for r in self.records)
        sent = sum(r.transmitted_count for r in self.records)
        return sent / elig if elig else 0.0

    def terminal_msle(self, fraction: float = 0.25) -> float:
        return terminal_mean([r.msle for r in self.records], fraction)


def terminal_mean(values: Sequence[float], fraction: float = 0.25) -> float:
    k = max(1, math.ceil(len(values) * fraction))
    return float(np.mean(values[-k:]))


def msle(truth, estimates) -> float:
    """Mean square localization error over ordered pairs of robots.

    ``(1/N) sum_i sum_{j != i} (|p_i - p_j| - |p^_i - p^_j|)^2`` on the
    positions. Accepts RobotState/Estimate lists or (N, >=2) arrays.
    """
    p = _positions(truth)
    q = _positions(estimates)
    if len(p) != len(q):
        raise ValueError("truth and estimates differ in length")
    n = len(p)
    if n < 2:
        raise ValueError("MSLE needs at least two robots")
    dt = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    de = np.hypot(q[:, None, 0] - q[None, :, 0], q[:, None, 1] - q[None, :, 1])
    return float(np.sum((dt - de) ** 2) / n)


def _positions(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return items[:, :2].astype(float)
    rows = []
    for it in items:
        if hasattr(it, "mean"):
            rows.append(np.asarray(it.mean)[:2])
        elif hasattr(it, "x"):
            rows.append((it.x, it.y))
        else:
            rows.append(np.asarray(it, dtype=float)[:2])
    return np.array(rows, dtype=float)


def leader_index(cfg: ScenarioConfig, start: np.ndarray) -> int:
    if cfg.leader is not None:
        return cfg.leader
    c = np.array(cfg.area) / 2
    return int(np.argmin(np.hypot(start[:, 0] - c[0], start[:, 1] - c[1])))


def _go_to(state: np.ndarray, target: np.ndarray, k_v, k_omega, v_max, omega_max, tol):
    """Vectorized proportional go-to-point law (same as world.leader_follower_control)."""
    dx = target[:, 0] - state[:, 0]
    dy = target[:, 1] - state[:, 1]
    dist = np.hypot(dx, dy)
    err = wrap_angle(np.arctan2(dy, dx) - state[:, 2])
    v = np.minimum(k_v * dist, v_max)
    w = np.clip(k_omega * err, -omega_max, omega_max)
    stop = dist <= tol
    return np.stack([np.where(stop, 0.0, v), np.where(stop, 0.0, w)], axis=-1)


class _Formation:
    """Leader tracks waypoints; followers track fixed offsets in the leader frame."""

    def __init__(self, cfg: ScenarioConfig, start: np.ndarray):
        self.cfg = cfg
        self.leader = leader_index(cfg, start)
        self.offsets = start[:, :2] - start[self.leader, :2]
        self.wp = 0

    def controls(self, truth: np.ndarray) -> np.ndarray:
        c = self.cfg.control
        n = len(truth)
        L = truth[self.leader]
        rot = np.array([[math.cos(L[2]), -math.sin(L[2])], [math.sin(L[2]), math.cos(L[2])]])
        targets = L[:2] + self.offsets @ rot.T
        u = _go_to(truth, targets, c.k_v, c.k_omega, c.v_max, c.omega_max, 0.005)
        u[self.leader] = self._leader_control(L, c)
        return u.reshape(n, 2)

    def _leader_control(self, L, c):
        wps = self.cfg.waypoints
        for _ in range(2 * len(wps)):
            if self.wp >= len(wps):
                break
            w = wps[self.wp]
            if math.hypot(w.x - L[0], w.y - L[1]) > w.arrival_tolerance:
                break
            self.wp += 1
            if self.wp == len(wps) and c.loop_waypoints:
                self.wp = 0
        if self.wp >= len(wps):
            return np.zeros(2)
        w = wps[self.wp]
        return _go_to(
            L[None], np.array([[w.x, w.y]]), c.k_v, c.k_omega, c.leader_speed, c.omega_max, 0.0
        )[0]


def _rank_within(obs: np.ndarray) -> np.ndarray:
    """Position of each link within its observer's (sorted) neighbor list."""
    if len(obs) == 0:
        return obs
    first = np.r_[0, np.flatnonzero(np.diff(obs)) + 1]
    counts = np.diff(np.r_[first, len(obs)])
    return np.arange(len(obs)) - np.repeat(first, counts)


def run(
    cfg: ScenarioConfig,
    *,
    record_links: bool = False,
    on_step: Callable[[StepTrace], None] | None = None,
) -> RunResult:
    """Simulate one scenario. Equal configs (seed included) give identical output."""
    n = cfg.n_robots
    dt = cfg.dt
    model = ROBOT_MODEL
    flt = make_filter(
        cfg.filter_kind, model, **(
            dict(alpha=cfg.ukf_alpha, beta=cfg.ukf_beta, kappa=cfg.ukf_kappa)
            if cfg.filter_kind == "ukf" else {}
        )
    )
    rng_init, rng_proc, rng_sense, rng_attack, rng_comm = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(5)
    )

    truth = np.array([s.as_array() for s in init_lattice(n, cfg.area)])
    formation = _Formation(cfg, truth)
    init_sigma = np.asarray(cfg.init_sigma, dtype=float)
    mean = truth + init_sigma * rng_init.standard_normal((n, 3))
    mean[:, 2] = wrap_angle(mean[:, 2])
    cov = np.broadcast_to(np.diag(init_sigma**2), (n, 3, 3)).copy()
    diverged = np.zeros(n, dtype=bool)

    Q = cfg.Q
    q_std = np.sqrt(np.asarray(cfg.process_noise, dtype=float))
    R = cfg.noise.R
    W = comms.whitening(R, cfg.trigger.norm)
    trig = cfg.trigger
    magnitude = np.asarray(cfg.attack_magnitude, dtype=float)
    inflate = cfg.neighbor_uncertainty == "inflate"

    result = RunResult(cfg, [])
    for k in range(1, cfg.steps + 1):
        # ground truth
        u = formation.controls(truth)
        truth = unicycle(truth, u, dt)
        truth += q_std * rng_proc.standard_normal((n, 3))
        truth[:, 2] = wrap_angle(truth[:, 2])

        # sensing and adversary, drawn as full per-pair blocks
        obs, tgt, z = sense_arrays(truth, cfg.noise, cfg.sensing_radius, rng_sense)
        Ds = adversary.zone_rates(cfg.zones, adversary.SENSING, truth)
        Dc = adversary.zone_rates(cfg.zones, adversary.COMMUNICATION, truth)
        hit_u = rng_attack.random((n, n))
        sign_u = rng_attack.random((n, n, 2))
        z, compromised = adversary.attack_arrays(
            z, Ds[obs], magnitude, hit_u[obs, tgt], sign_u[obs, tgt]
        )
        sigma = ~(rng_comm.random((n, n))[obs, tgt] < Dc[obs])

        # prediction
        new_mean, new_cov, bad = flt.predict(mean, cov, u, dt, Q)
        newly = bad & ~diverged
        diverged |= bad
        if diverged.any():
            dr = diverged
            F = unicycle_jacobian(mean[dr], u[dr], dt)
            new_mean[dr] = unicycle(mean[dr], u[dr], dt)
            new_cov[dr] = F @ cov[dr] @ np.swapaxes(F, -1, -2) + Q
        mean, cov = new_mean, new_cov
        prior_mean, prior_cov = mean.copy(), cov.copy()

        # correction, one round per neighbor rank so each robot fuses its
        # links in ascending neighbor order against the broadcast snapshot
        adj = adjacency(truth, cfg.sensing_radius)
        graph = CommGraph(adj)
        lam2 = graph_lambda2(graph) if n >= 2 else 0.0
        if trig.lambda2_scope == "local":
            lam_i = np.array([local_lambda2(graph, i) for i in range(n)])
        else:
            lam_i = np.full(n, max(lam2, LAMBDA2_EPS))

        m = len(obs)
        nrm = np.zeros(m)
        delta = np.full(m, -np.inf)
        flagged = np.zeros(m, dtype=bool)
        triggered = np.zeros(m, dtype=bool)
        fused = np.zeros(m, dtype=bool)
        rank = _rank_within(obs)
        for r in range(int(rank.max()) + 1 if m else 0):
            sel = np.flatnonzero(rank == r)
            I, J = obs[sel], tgt[sel]
            ctx = prior_mean[J]
            R_eff = effective_noise(model, R, ctx, prior_cov[J] if inflate else None, mean[I])
            z_hat, Pzz, Pxz, bad_m = flt.predict_measurement(mean[I], cov[I], ctx, R_eff)
            lam = comms.innovation(z[sel], z_hat)
            nr = comms.innovation_norm(lam, W)
            flag = nr > trig.rho
            if cfg.comm_mode == comms.EVENT:
                d = comms.adaptive_threshold(trig, lam_i[I], nr, Ds[I], Dc[I])
            else:
                d = np.full(len(sel), -np.inf)
            t = comms.trigger_mask(
                cfg.comm_mode, nr, d, rate=cfg.periodic_rate, step=k, i=I, j=J
            ) & ~flag
            go = t & sigma[sel] & ~diverged[I] & ~bad_m
            mI, cI, _, _, ok = apply_update(mean[I], cov[I], z[sel], z_hat, Pzz, Pxz, model, mask=go)
            mean[I], cov[I] = mI, cI
            nrm[sel], delta[sel], flagged[sel], triggered[sel], fused[sel] = nr, d, flag, t, ok

        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            broken = ~(np.all(np.isfinite(mean), axis=1) & np.all(np.isfinite(cov), axis=(1, 2)))
            newly |= broken & ~diverged
            diverged |= broken
            mean[broken], cov[broken] = prior_mean[broken], prior_cov[broken]

        eligible = int(np.sum(~flagged))
        sent = int(np.sum(triggered & sigma))
        err = np.hypot(*(mean[:, :2] - truth[:, :2]).T)
        result.records.append(
            StepRecord(
                step=k,
                msle=msle(truth, mean) if n >= 2 else 0.0,
                comm_rate=sent / eligible if eligible else 0.0,
                lambda2=lam2,
                per_robot_error=tuple(float(e) for e in err),
                discarded_count=int(flagged.sum()),
                dropped_count=int(np.sum(triggered & ~sigma)),
                triggered_count=int(triggered.sum()),
                transmitted_count=sent,
                eligible_count=eligible,
                fused_count=int(fused.sum()),
                false_discard_count=int(np.sum(flagged & ~compromised)),
                abs_mse=float(np.mean(err**2)),
                diverged=tuple(int(i) for i in np.flatnonzero(diverged)),
            )
        )
        if record_links or on_step is not None:
            log = LinkLog(obs, tgt, nrm, delta, triggered, flagged, sigma, fused, compromised)
            if record_links:
                result.links.append(log)
            if on_step is not None:
                on_step(StepTrace(k, truth.copy(), prior_mean, prior_cov, mean.copy(), cov.copy(), log))
    return result


def with_axis(base: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "zone_radius":
        return replace(base, zones=tuple(replace(z, radius=float(value)) for z in base.zones))
    if axis == "rho":
        return replace(base, trigger=replace(base.trigger, rho=float(value)))
    if axis == "comm_rate":
        return replace(base, comm_mode=comms.PERIODIC, periodic_rate=float(value))
    if axis == "n_robots":
        return replace(base, n_robots=int(value), leader=None)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    mean_msle: float
    std_msle: float
    mean_comm_rate: float
    std_comm_rate: float
    msle: tuple[float, ...]
    comm_rate: tuple[float, ...]


@dataclass
class SweepTable:
    axis: str
    rows: list[SweepRow]
    runs: list[tuple[float, int, RunResult]] = field(default_factory=list)


def run_sweep(
    base: ScenarioConfig,
    axis: str,
    values: Sequence,
    seeds: int,
    *,
    keep_runs: bool = False,
    progress: Callable[[str], None] | None = None,
) -> SweepTable:
    """Repeat ``run`` over axis values and seeds ``base.seed + s``.

    Every axis value sees the same seeds, so comparisons across values are
    paired. MSLE is summarized over the last quarter of steps; the comm rate
    over the whole run.
    """
    if len(values) == 0:
        raise ValueError("sweep needs at least one value")
    if seeds < 1:
        raise ValueError("sweep needs at least one seed")
    table = SweepTable(axis, [])
    for v in values:
        cfg_v = with_axis(base, axis, v)
        ms, cr = [], []
        for s in range(seeds):
            res = run(replace(cfg_v, seed=base.seed + s))
            ms.append(res.terminal_msle())
            cr.append(res.comm_rate)
            if keep_runs:
                table.runs.append((float(v), base.seed + s, res))
            if progress:
                progress(f"{axis}={v} seed={base.seed + s} msle={ms[-1]:.4g} comm={cr[-1]:.3f}")
        table.rows.append(
            SweepRow(
                float(v),
                float(np.mean(ms)),
                float(np.std(ms, ddof=1)) if len(ms) > 1 else 0.0,
                float(np.mean(cr)),
                float(np.std(cr, ddof=1)) if len(cr) > 1 else 0.0,
                tuple(ms),
                tuple(cr),
            )
        )
    return table
