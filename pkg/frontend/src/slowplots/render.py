"""Deterministic figure rendering from diagnostic CSV files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from slowplots.data import group_rows, load_table, sector_dimension, seed_mean_series
from slowplots.figspec import FigureSpec

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def render(spec: FigureSpec, data_dir, out_dir) -> Path:
    """Draw one figure from `<data_dir>/<diagnostic>.csv` into `out_dir`.

    Output bytes depend only on the spec and the CSV contents: the SVG id
    salt is pinned to the figure id and the date stamp is suppressed.
    """
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = load_table(data_dir / f"{spec.diagnostic}.csv")
    groups = group_rows(table, spec.group_by)

    with plt.rc_context({"svg.hashsalt": spec.figure_id}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        late_points = []
        if spec.kind == "timeseries":
            late_points = _draw_timeseries(ax, spec, table, groups)
        elif spec.kind == "histogram":
            _draw_histogram(ax, spec, table, groups)
        else:
            _draw_concentration(ax, spec, table, groups)
        ax.set_xscale(spec.main.xscale)
        ax.set_yscale(spec.main.yscale)
        if len(groups) > 1 or spec.group_by:
            # keep the legend clear of the inset corner
            loc = "upper left" if spec.inset else "best"
            ax.legend(fontsize=8, frameon=False, loc=loc)
        fig.tight_layout()
        if spec.inset and late_points:
            _draw_inset(fig, late_points)
        out_path = out_dir / f"{spec.figure_id}.{spec.format}"
        fig.savefig(out_path, format=spec.format, metadata={"Date": None})
        plt.close(fig)
    return out_path


def _group_label(keys: tuple, combo: tuple) -> str:
    return ", ".join(f"{k} = {v}" for k, v in zip(keys, combo))


def _draw_timeseries(ax, spec, table, groups) -> list:
    """Seed-averaged value against time, one line per group."""
    late_points = []
    for i, (combo, mask) in enumerate(groups.items()):
        t, v = seed_mean_series(table, mask)
        x = t
        if spec.main.time_rescale == "L^2":
            L = int(table["L"][mask][0])
            x = t / L**2
        ax.plot(
            x, v, color=_COLORS[i % len(_COLORS)], lw=1.2,
            label=_group_label(spec.group_by, combo),
        )
        model = str(table["model"][mask][0])
        D = sector_dimension(model, int(table["L"][mask][0]))
        tail = v[2 * len(v) // 3 :]
        late_points.append((D, float(tail.mean())))

    xlabel = "t / L^2" if spec.main.time_rescale == "L^2" else "t"
    ax.set_xlabel(xlabel)
    ax.set_ylabel(spec.diagnostic)
    return late_points


def _draw_inset(fig, points) -> None:
    """Log-log scatter of late-time means against dimension with a fit."""
    axi = fig.add_axes([0.62, 0.62, 0.27, 0.27])
    pts = sorted(p for p in points if p[1] > 0)
    D = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    axi.scatter(D, y, s=14, color="k", zorder=3)
    axi.set_xscale("log")
    axi.set_yscale("log")
    axi.set_xlabel("D", fontsize=7)
    axi.tick_params(labelsize=7)
    if len(pts) >= 3:
        slope, intercept = np.polyfit(np.log(D), np.log(y), 1)
        axi.plot(D, np.exp(intercept) * D**slope, color="r", lw=0.8)
        axi.set_title(f"$\\alpha$ = {-slope:.2f}", fontsize=8)


def _draw_histogram(ax, spec, table, groups) -> None:
    """Distribution of the value column, one overlay per group."""
    for i, (combo, mask) in enumerate(groups.items()):
        v = table["value"][mask]
        nbins = max(10, min(60, len(v) // 10))
        ax.hist(
            v, bins=nbins, density=True, histtype="step",
            color=_COLORS[i % len(_COLORS)],
            label=_group_label(spec.group_by, combo),
        )
    ax.set_xlabel(spec.diagnostic)
    ax.set_ylabel("density")


def _draw_concentration(ax, spec, table, groups) -> None:
    """Per-macrostate sampled spread; the t column carries the label x."""
    for i, (combo, mask) in enumerate(groups.items()):
        x = table["t"][mask]
        v = table["value"][mask]
        order = np.argsort(x)
        ax.plot(
            x[order], v[order], "o-", ms=4, lw=0.8,
            color=_COLORS[i % len(_COLORS)],
            label=_group_label(spec.group_by, combo),
        )
    ax.set_xlabel("x")
    ax.set_ylabel(spec.diagnostic)
