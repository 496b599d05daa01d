"""Delimited text output for runs and sweeps.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so exported files are byte-identical for identical runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

RECORD_COLUMNS = ("step", "msle", "comm_rate", "lambda2", "discarded", "dropped")
PLOT_KINDS = ("msle_timeseries", "comm_raster", "sweep_curve")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _record_row(r) -> list:
    return [r.step, r.msle, r.comm_rate, r.lambda2, r.discarded_count, r.dropped_count]


def _write(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return path


def export_csv(records, path) -> Path:
    if not records:
        raise ValueError("nothing to export")
    return _write(path, RECORD_COLUMNS, (_record_row(r) for r in records))


def export_sweep_csv(table, path) -> Path:
    """Per-step records of every sweep run, prefixed by ``axis_value,seed``."""
    if not table.runs:
        raise ValueError("sweep table holds no runs; use keep_runs=True")
    rows = (
        [value, seed] + _record_row(r)
        for value, seed, res in table.runs
        for r in res.records
    )
    return _write(path, ("axis_value", "seed") + RECORD_COLUMNS, rows)


def read_csv(path) -> list[dict]:
    """Read an exported file back; integer columns as int, the rest as float."""
    ints = {"step", "discarded", "dropped", "seed", "observer", "target", "triggered"}
    with Path(path).open(newline="") as fh:
        return [
            {k: (int(v) if k in ints else float(v)) for k, v in row.items()}
            for row in csv.DictReader(fh)
        ]


def emit_plot_data(data, kind: str, path) -> Path:
    """Write plot-ready columns.

    ``msle_timeseries`` takes step records, ``comm_raster`` a run result
    recorded with ``record_links=True``, ``sweep_curve`` a sweep table.
    """
    if kind == "msle_timeseries":
        return _write(path, ("step", "msle"), ((r.step, r.msle) for r in data))
    if kind == "comm_raster":
        if not data.links:
            raise ValueError("run has no link log; run with record_links=True")
        rows = (
            (rec.step, i, j, t)
            for rec, log in zip(data.records, data.links)
            for i, j, t in zip(log.observer, log.target, log.triggered)
        )
        return _write(path, ("step", "observer", "target", "triggered"), rows)
    if kind == "sweep_curve":
        rows = ((r.axis_value, r.mean_msle, r.std_msle, r.mean_comm_rate) for r in data.rows)
        return _write(path, ("axis_value", "mean_msle", "std_msle", "mean_comm_rate"), rows)
    raise ValueError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
