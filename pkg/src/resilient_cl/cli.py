"""Command line entry point: ``resilient-cl {run,sweep,validate}``.

Exit codes: 0 success, 1 configuration error, 2 runtime or filter error,
3 I/O error. The output directory defaults to ``$RESILIENT_CL_OUT`` or
``./out``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, load_config, sweep_defaults
from .export import emit_plot_data, export_csv, export_sweep_csv
from .filters import FilterDivergenceError
from .sim import SWEEP_AXES, run, run_sweep

log = logging.getLogger("resilient_cl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "RESILIENT_CL_OUT"


@dataclass
class RunManifest:
    config_path: str
    output_dir: Path | None
    command: str
    overrides: list[str] = field(default_factory=list)


def _out_dir(arg) -> Path:
    return Path(arg or os.environ.get(OUT_ENV, "out"))


def _prepare(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e.strerror or e}") from e
    if not os.access(out, os.W_OK):
        raise OSError(f"output directory {out} is not writable")
    return out


def cmd_validate(m: RunManifest, args) -> int:
    cfg = load_config(m.config_path, m.overrides)
    print(
        f"ok: {cfg.n_robots} robots, {cfg.steps} steps, filter={cfg.filter_kind}, "
        f"comm={cfg.comm_mode}, {len(cfg.zones)} zones"
    )
    return EXIT_OK


def cmd_run(m: RunManifest, args) -> int:
    cfg = load_config(m.config_path, m.overrides)
    out = _prepare(m.output_dir)
    res = run(cfg, record_links=True)
    export_csv(res.records, out / "records.csv")
    emit_plot_data(res.records, "msle_timeseries", out / "msle_timeseries.csv")
    emit_plot_data(res, "comm_raster", out / "comm_raster.csv")
    if not args.no_figures:
        from .plotting import plot_comm_raster, plot_msle

        plot_msle({cfg.filter_kind.upper(): res.records}, out / "msle.png", dt=cfg.dt)
        plot_comm_raster(res, out / "comm_raster.png")
    diverged = res.records[-1].diverged
    print(
        f"terminal MSLE {res.terminal_msle():.6g} m^2, comm rate {res.comm_rate:.3f}, "
        f"discarded {sum(r.discarded_count for r in res.records)}, "
        f"dropped {sum(r.dropped_count for r in res.records)}"
        + (f", diverged robots {list(diverged)}" if diverged else "")
    )
    print(f"wrote {out}")
    return EXIT_OK


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values: expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(m: RunManifest, args) -> int:
    cfg = load_config(m.config_path, m.overrides)
    sw = sweep_defaults(m.config_path, m.overrides)
    axis = args.axis or sw.get("axis")
    values = _parse_values(args.values) if args.values else list(sw.get("values") or [])
    seeds = args.seeds or sw.get("seeds") or 1
    problems = []
    if axis not in SWEEP_AXES:
        problems.append(f"--axis: expected one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        problems.append("--values: at least one value is required")
    if int(seeds) < 1:
        problems.append("--seeds: must be at least 1")
    if problems:
        raise ConfigError(problems)
    out = _prepare(m.output_dir)
    table = run_sweep(cfg, axis, values, int(seeds), keep_runs=True, progress=log.info)
    export_sweep_csv(table, out / "sweep.csv")
    emit_plot_data(table, "sweep_curve", out / "sweep_curve.csv")
    if not args.no_figures:
        from .plotting import plot_sweep

        plot_sweep(table, out / "sweep_curve.png")
    for r in table.rows:
        print(
            f"{axis}={r.axis_value:g}: MSLE {r.mean_msle:.6g} +- {r.std_msle:.3g}, "
            f"comm rate {r.mean_comm_rate:.3f}"
        )
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="resilient-cl",
        description="Fault-tolerant cooperative localization simulator.",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, help="scenario file or bundled name")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
        if out:
            sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
            sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    common(sub.add_parser("run", help="simulate one scenario"))
    sp = sub.add_parser("sweep", help="repeat a scenario over an axis and seeds")
    common(sp)
    sp.add_argument("--axis", choices=SWEEP_AXES)
    sp.add_argument("--values", help="comma-separated axis values")
    sp.add_argument("--seeds", type=int)
    common(sub.add_parser("validate", help="check a scenario file"), out=False)
    return p


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    m = RunManifest(
        args.config,
        _out_dir(getattr(args, "out", None)) if args.command != "validate" else None,
        args.command,
        args.overrides,
    )
    try:
        return COMMANDS[args.command](m, args)
    except ConfigError as e:
        print("configuration error:", file=sys.stderr)
        for line in e.problems:
            print(f"  {line}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"configuration error: {e.filename or e}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    except (FilterDivergenceError, ArithmeticError, ValueError, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
