"""Figures for run and sweep reports, rendered straight to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "savefig.dpi": 150,
}
# no version/date stamps so identical inputs give identical files
PNG_METADATA = {"Software": None}


def _figure(width=4.5, height=2.8):
    return plt.subplots(figsize=(width, height), layout="constrained")


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_msle(series, path, dt: float | None = None):
    """MSLE against time. ``series`` maps a label to a list of step records."""
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        for label, records in series.items():
            t = np.array([r.step for r in records], dtype=float)
            if dt:
                t *= dt
            ax.plot(t, [r.msle for r in records], label=label)
        ax.set_xlabel("time [s]" if dt else "step")
        ax.set_ylabel(r"MSLE [m$^2$]")
        ax.set_yscale("log")
        if len(series) > 1:
            ax.legend()
        return _save(fig, path)


def plot_comm_raster(result, path):
    """Transmission instants per robot (any triggered outgoing link)."""
    n = result.config.n_robots
    steps = [r.step for r in result.records]
    grid = np.zeros((n, len(steps)), dtype=bool)
    for k, log in enumerate(result.links):
        sent = log.observer[log.triggered & log.sigma]
        grid[np.unique(sent), k] = True
    with plt.rc_context(STYLE):
        fig, ax = _figure(height=3.2)
        for i in range(n):
            ks = np.flatnonzero(grid[i])
            ax.vlines(np.asarray(steps)[ks], i + 0.6, i + 1.4, color="C0", linewidth=0.6)
        ax.set_xlabel("step")
        ax.set_ylabel("robot")
        ax.set_ylim(0.5, n + 0.5)
        ax.set_title(f"average communication rate = {result.comm_rate:.2f}")
        return _save(fig, path)


def plot_sweep(table, path, label: str | None = None):
    v = np.array([r.axis_value for r in table.rows])
    m = np.array([r.mean_msle for r in table.rows])
    s = np.array([r.std_msle for r in table.rows])
    c = np.array([r.mean_comm_rate for r in table.rows])
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.errorbar(v, m, yerr=s, marker="o", capsize=3, label="MSLE")
        ax.set_xlabel(label or table.axis.replace("_", " "))
        ax.set_ylabel(r"terminal MSLE [m$^2$]")
        ax2 = ax.twinx()
        ax2.plot(v, c, "s--", color="C1", label="comm rate")
        ax2.set_ylabel("communication rate")
        ax2.set_ylim(0, 1.05)
        ax2.grid(False)
        handles = ax.get_legend_handles_labels()[0] + ax2.get_legend_handles_labels()[0]
        ax.legend(handles, [h.get_label() for h in handles], loc="upper left")
        return _save(fig, path)
