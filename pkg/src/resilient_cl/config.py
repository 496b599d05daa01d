"""Scenario files: YAML mirroring :class:`~resilient_cl.sim.ScenarioConfig`.

Top-level keys are the scenario fields; ``noise``, ``trigger`` and
``control`` are nested mappings, ``zones`` a list of mappings and
``waypoints`` a list of ``[x, y]`` or ``[x, y, tolerance]``. Missing keys take
the library defaults. A file may also carry a ``sweep`` mapping
(``axis``, ``values``, ``seeds``) used as defaults by the ``sweep`` command.

Bundled scenarios are addressed by bare name, e.g. ``paper_baseline``.
"""

from __future__ import annotations

import copy
import dataclasses
import math
from importlib import resources
from pathlib import Path

import yaml

from . import comms
from .adversary import COMMUNICATION, SENSING, DangerZone, max_rate
from .comms import TriggerConfig
from .graph import build_graph, lambda2
from .sensing import NoiseConfig
from .sim import FILTER_KINDS, SWEEP_AXES, ControlConfig, ScenarioConfig
from .world import Waypoint, init_lattice

BUNDLED = (
    "paper_baseline",
    "adversarial_partial",
    "adversarial_full",
    "radius_sweep",
    "rho_sweep",
    "scalability",
    "noiseless",
)


class ConfigError(ValueError):
    """Raised with every problem found, one per line."""

    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("\n".join(self.problems))


def defaults() -> dict:
    cfg = ScenarioConfig()
    d = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    d["noise"] = dataclasses.asdict(cfg.noise)
    d["trigger"] = dataclasses.asdict(cfg.trigger)
    d["control"] = dataclasses.asdict(cfg.control)
    for key in ("area", "attack_magnitude", "process_noise", "init_sigma"):
        d[key] = list(d[key])
    d["zones"] = []
    d["waypoints"] = []
    d["sweep"] = {"axis": None, "values": [], "seeds": 1}
    return d


def resolve_path(path) -> Path:
    p = Path(path)
    if p.exists() or p.suffix:
        return p
    bundled = resources.files("resilient_cl") / "configs" / f"{p.name}.yaml"
    if bundled.is_file():
        return Path(str(bundled))
    return p


def read_raw(path) -> dict:
    """Parse a scenario file; syntax errors carry the line number."""
    p = resolve_path(path)
    try:
        text = p.read_text()
    except FileNotFoundError:
        raise
    except OSError as e:
        raise OSError(f"{p}: {e}") from e
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"{p}: parse error at {where}: {problem}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return raw


def merge(base: dict, raw: dict, prefix: str = "") -> tuple[dict, list[str]]:
    out = copy.deepcopy(base)
    problems = []
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in base:
            problems.append(f"{path}: unknown key")
            continue
        if isinstance(base[key], dict) and isinstance(value, dict):
            sub, p = merge(base[key], value, f"{path}.")
            out[key] = sub
            problems += p
        else:
            out[key] = value
    return out, problems


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` strings; values are parsed as YAML scalars."""
    data = copy.deepcopy(data)
    problems = []
    for item in overrides or ():
        if "=" not in item:
            problems.append(f"override {item!r}: expected key=value")
            continue
        key, _, text = item.partition("=")
        parts = key.strip().split(".")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            value = text
        node = data
        for i, part in enumerate(parts):
            last = i == len(parts) - 1
            if isinstance(node, list) and part.isdigit() and int(part) < len(node):
                part = int(part)
            elif not (isinstance(node, dict) and part in node):
                problems.append(f"override {key!r}: no such config key")
                break
            if last:
                node[part] = value
            else:
                node = node[part]
    if problems:
        raise ConfigError(problems)
    return data


def _num(problems, path, value, *, positive=False, nonneg=False, integer=False, allow_inf=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{path}: expected a number, got {value!r}")
        return None
    if integer and not float(value).is_integer():
        problems.append(f"{path}: expected an integer, got {value!r}")
        return None
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        problems.append(f"{path}: must be finite")
        return None
    if positive and not value > 0:
        problems.append(f"{path}: must be positive")
    if nonneg and not value >= 0:
        problems.append(f"{path}: must be non-negative")
    return int(value) if integer else float(value)


def _vec(problems, path, value, n, **kw):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        problems.append(f"{path}: expected a list of {n} numbers, got {value!r}")
        return None
    out = [_num(problems, f"{path}[{i}]", v, **kw) for i, v in enumerate(value)]
    return None if any(v is None for v in out) else tuple(out)


def build(data: dict) -> ScenarioConfig:
    """Validate a merged mapping and build the scenario; collects all problems."""
    P: list[str] = []
    n = _num(P, "n_robots", data["n_robots"], positive=True, integer=True)
    steps = _num(P, "steps", data["steps"], positive=True, integer=True)
    dt = _num(P, "dt", data["dt"], positive=True)
    area = _vec(P, "area", data["area"], 2, positive=True)
    radius = _num(P, "sensing_radius", data["sensing_radius"], positive=True)
    seed = _num(P, "seed", data["seed"], nonneg=True, integer=True)
    rate = _num(P, "periodic_rate", data["periodic_rate"], positive=True)
    if rate is not None and rate > 1:
        P.append("periodic_rate: must be at most 1")
    if data["filter_kind"] not in FILTER_KINDS:
        P.append(f"filter_kind: expected one of {FILTER_KINDS}, got {data['filter_kind']!r}")
    if data["comm_mode"] not in comms.COMM_MODES:
        P.append(f"comm_mode: expected one of {comms.COMM_MODES}, got {data['comm_mode']!r}")
    if data["neighbor_uncertainty"] not in ("inflate", "ignore"):
        P.append("neighbor_uncertainty: expected 'inflate' or 'ignore'")
    mag = _vec(P, "attack_magnitude", data["attack_magnitude"], 2, nonneg=True)
    qn = _vec(P, "process_noise", data["process_noise"], 3, nonneg=True)
    init = _vec(P, "init_sigma", data["init_sigma"], 3, nonneg=True)
    ua = _num(P, "ukf_alpha", data["ukf_alpha"], positive=True)
    ub = _num(P, "ukf_beta", data["ukf_beta"], nonneg=True)
    uk = _num(P, "ukf_kappa", data["ukf_kappa"])
    leader = data["leader"]
    if leader is not None:
        leader = _num(P, "leader", leader, nonneg=True, integer=True)
        if leader is not None and n is not None and leader >= n:
            P.append(f"leader: index {leader} out of range for {n} robots")

    nz = data["noise"]
    sr = _num(P, "noise.sigma_range", nz["sigma_range"], nonneg=True)
    sb = _num(P, "noise.sigma_bearing", nz["sigma_bearing"], nonneg=True)

    ct = data["control"]
    ctl = {}
    for key in ("k_v", "k_omega", "v_max", "omega_max", "leader_speed"):
        ctl[key] = _num(P, f"control.{key}", ct[key], positive=True)
    if not isinstance(ct["loop_waypoints"], bool):
        P.append("control.loop_waypoints: expected true or false")
    ctl["loop_waypoints"] = bool(ct["loop_waypoints"])

    zones = []
    if not isinstance(data["zones"], list):
        P.append("zones: expected a list")
    else:
        for i, zd in enumerate(data["zones"]):
            path = f"zones[{i}]"
            if not isinstance(zd, dict):
                P.append(f"{path}: expected a mapping")
                continue
            extra = set(zd) - {"kind", "center", "radius", "peak_rate", "threshold"}
            for key in sorted(extra):
                P.append(f"{path}.{key}: unknown key")
            kind = zd.get("kind")
            if kind not in (SENSING, COMMUNICATION):
                P.append(f"{path}.kind: expected 'sensing' or 'communication', got {kind!r}")
            center = _vec(P, f"{path}.center", zd.get("center"), 2)
            zr = _num(P, f"{path}.radius", zd.get("radius"), positive=True)
            peak = _num(P, f"{path}.peak_rate", zd.get("peak_rate"), nonneg=True)
            if peak is not None and peak > 1:
                P.append(f"{path}.peak_rate: must lie in [0, 1]")
            thr = _num(P, f"{path}.threshold", zd.get("threshold", 0.5), nonneg=True)
            if thr is not None and thr > 1:
                P.append(f"{path}.threshold: must lie in [0, 1]")
            try:
                zones.append(DangerZone(kind, center, zr, peak, thr))
            except (TypeError, ValueError):
                pass

    waypoints = []
    if not isinstance(data["waypoints"], list):
        P.append("waypoints: expected a list")
    else:
        for i, w in enumerate(data["waypoints"]):
            if not isinstance(w, (list, tuple)) or len(w) not in (2, 3):
                P.append(f"waypoints[{i}]: expected [x, y] or [x, y, tolerance]")
                continue
            vals = [_num(P, f"waypoints[{i}][{k}]", v) for k, v in enumerate(w)]
            if any(v is None for v in vals):
                continue
            tol = vals[2] if len(vals) == 3 else 0.05
            if not tol > 0:
                P.append(f"waypoints[{i}]: tolerance must be positive")
                continue
            waypoints.append(Waypoint(vals[0], vals[1], tol))

    tr = data["trigger"]
    tvals = {}
    for key in ("alpha", "gamma", "zeta_s", "zeta_c"):
        tvals[key] = _num(P, f"trigger.{key}", tr[key])
    tvals["rho"] = _num(P, "trigger.rho", tr["rho"], positive=True, allow_inf=True)
    trigger = None
    if all(v is not None for v in tvals.values()):
        trigger = TriggerConfig(norm=tr["norm"], lambda2_scope=tr["lambda2_scope"], **tvals)
        P += trigger.violations(max_rate(zones, SENSING), max_rate(zones, COMMUNICATION))

    sw = data["sweep"]
    if sw.get("axis") is not None and sw["axis"] not in SWEEP_AXES:
        P.append(f"sweep.axis: expected one of {SWEEP_AXES}, got {sw['axis']!r}")

    if not P and n >= 2:
        try:
            start = init_lattice(n, area)
        except ValueError as e:
            P.append(f"n_robots: {e}")
        else:
            lam = lambda2(build_graph([(s.x, s.y) for s in start], radius))
            if lam <= 0:
                P.append("sensing_radius: the initial lattice graph is disconnected")
            elif data["comm_mode"] == comms.EVENT and not trigger.rho > trigger.alpha / lam:
                P.append(
                    f"trigger.rho: must exceed the zone-free threshold alpha/lambda2 = "
                    f"{trigger.alpha / lam:.4g} of the initial formation"
                )
    if P:
        raise ConfigError(P)
    return ScenarioConfig(
        n_robots=n,
        steps=steps,
        dt=dt,
        area=area,
        sensing_radius=radius,
        noise=NoiseConfig(sr, sb),
        zones=tuple(zones),
        trigger=trigger,
        filter_kind=data["filter_kind"],
        comm_mode=data["comm_mode"],
        periodic_rate=rate,
        seed=seed,
        waypoints=tuple(waypoints),
        attack_magnitude=mag,
        process_noise=qn,
        init_sigma=init,
        control=ControlConfig(**ctl),
        leader=leader,
        neighbor_uncertainty=data["neighbor_uncertainty"],
        ukf_alpha=ua,
        ukf_beta=ub,
        ukf_kappa=uk,
    )


def load_data(path, overrides=()) -> dict:
    raw = read_raw(path)
    data, problems = merge(defaults(), raw)
    if problems:
        raise ConfigError([f"{resolve_path(path)}: {p}" for p in problems])
    return apply_overrides(data, overrides)


def load_config(path, overrides=()) -> ScenarioConfig:
    """Parse and validate a scenario file (bundled name or path)."""
    return build(load_data(path, overrides))


def sweep_defaults(path, overrides=()) -> dict:
    return load_data(path, overrides)["sweep"]
