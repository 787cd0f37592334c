"""Figures written straight to files (no interactive backend needed)."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.colors import BoundaryNorm, ListedColormap, Normalize, SymLogNorm
from matplotlib.figure import Figure

from .errors import ColumnMissing

X_AXIS = "kappa1_over_kappa2"
Y_AXIS = "kappa3_over_kappa2"
CLASS_ORDER = ("FP", "B", "LC")
CLASS_COLORS = ("#3b6ea8", "#e0a030", "#b03a48")


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed element ids and no timestamp so identical data give identical files
    with matplotlib.rc_context({"svg.hashsalt": "osc321", "svg.fonttype": "path"}):
        meta = {"Date": None} if path.suffix in (".svg", ".pdf") else {}
        fig.savefig(path, metadata=meta)
    return path


def read_csv_columns(csv_path) -> dict[str, list[str]]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for k in cols:
                cols[k].append(row[k])
    return cols


def _as_float(values):
    out = []
    for v in values:
        try:
            out.append(float(v))
        except ValueError:
            return None
    return np.array(out)


def render_heatmap(csv_path, column: str, out_svg, scale: str = "linear") -> Path:
    """Heatmap of ``column`` over the (kappa1/kappa2, kappa3/kappa2) grid of a sweep CSV.

    Both axes are logarithmic. ``scale`` selects the colour mapping:
    ``"linear"``, ``"log"`` or ``"symlog"``. Text columns (the FP/B/LC
    class) are drawn with a categorical palette. Grid cells without a row
    stay blank.
    """
    cols = read_csv_columns(csv_path)
    for name in (X_AXIS, Y_AXIS, column):
        if name not in cols:
            raise ColumnMissing(f"column {name!r} not found in {csv_path}")
    if not cols[X_AXIS]:
        raise ValueError(f"{csv_path} has no data rows")
    x = np.array([float(v) for v in cols[X_AXIS]])
    y = np.array([float(v) for v in cols[Y_AXIS]])
    xs, ys = np.unique(x), np.unique(y)
    grid = np.full((ys.size, xs.size), np.nan)
    raw = cols[column]
    numeric = _as_float(raw)
    categorical = numeric is None
    if categorical:
        cats = [c for c in CLASS_ORDER if c in raw] + sorted(set(raw) - set(CLASS_ORDER))
        numeric = np.array([cats.index(v) for v in raw], dtype=float)
    grid[np.searchsorted(ys, y), np.searchsorted(xs, x)] = numeric

    fig = Figure(figsize=(5.2, 4.0))
    ax = fig.add_subplot()
    xe, ye = _log_edges(xs), _log_edges(ys)
    if categorical:
        palette = list(CLASS_COLORS[: len(cats)]) + ["#777777"] * max(0, len(cats) - len(CLASS_COLORS))
        cmap = ListedColormap(palette[: len(cats)])
        norm = BoundaryNorm(np.arange(len(cats) + 1) - 0.5, len(cats))
    else:
        finite = grid[np.isfinite(grid)]
        lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
        cmap = matplotlib.colormaps["viridis"]
        if scale == "log" and lo > 0:
            grid = np.log10(grid)
            lo, hi = math.log10(lo), math.log10(hi)
        if scale == "symlog":
            lin = max(np.min(np.abs(finite[finite != 0])) if np.any(finite != 0) else 1.0, 1e-300)
            norm = SymLogNorm(linthresh=lin, vmin=lo, vmax=hi if hi > lo else lo + 1)
        else:
            norm = Normalize(vmin=lo, vmax=hi if hi > lo else lo + 1)
    mesh = ax.pcolormesh(xe, ye, np.ma.masked_invalid(grid), cmap=cmap, norm=norm, shading="flat")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\kappa_1/\kappa_2$")
    ax.set_ylabel(r"$\kappa_3/\kappa_2$")
    cb = fig.colorbar(mesh, ax=ax)
    if categorical:
        cb.set_ticks(range(len(cats)))
        cb.set_ticklabels(cats)
    else:
        cb.set_label(f"log10 {column}" if scale == "log" else column)
    fig.tight_layout()
    return _save(fig, out_svg)


def _log_edges(v: np.ndarray) -> np.ndarray:
    if v.size == 1:
        return np.array([v[0] / 1.5, v[0] * 1.5])
    lv = np.log10(v)
    mid = 0.5 * (lv[1:] + lv[:-1])
    return 10 ** np.concatenate(([lv[0] - (mid[0] - lv[0])], mid, [lv[-1] + (lv[-1] - mid[-1])]))


def plot_number_distribution(p, out, title: str | None = None) -> Path:
    p = np.asarray(getattr(p, "p", p))
    fig = Figure(figsize=(5, 3.2))
    ax = fig.add_subplot()
    ax.bar(np.arange(p.size), p, width=1.0, color="#3b6ea8")
    ax.set_xlabel("n")
    ax.set_ylabel("$P_n$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, out)


def plot_wigner(grid, out, title: str | None = None) -> Path:
    fig = Figure(figsize=(4.6, 4.0))
    ax = fig.add_subplot()
    lim = np.abs(grid.values).max()
    im = ax.imshow(
        grid.values,
        origin="lower",
        extent=(-grid.extent, grid.extent, -grid.extent, grid.extent),
        cmap="RdBu_r",
        vmin=-lim,
        vmax=lim,
    )
    ax.set_xlabel(r"Re $\alpha$")
    ax.set_ylabel(r"Im $\alpha$")
    fig.colorbar(im, ax=ax, label="W")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, out)


def plot_phase_distribution(dist, out, title: str | None = None) -> Path:
    fig = Figure(figsize=(5, 3.2))
    ax = fig.add_subplot()
    ax.plot(dist.phi, dist.density - 1 / (2 * np.pi), color="#b03a48")
    ax.set_xlabel(r"$\phi$")
    ax.set_ylabel(r"$P(\phi) - 1/2\pi$")
    ax.set_xticks(np.arange(5) * np.pi / 2, ["0", r"$\pi/2$", r"$\pi$", r"$3\pi/2$", r"$2\pi$"])
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, out)


def plot_activity(stats, out, title: str | None = None) -> Path:
    fig = Figure(figsize=(6, 3.2))
    ax = fig.add_subplot()
    ax.step(stats.times, stats.counts, where="post", lw=0.6, color="#333333")
    if stats.threshold is not None:
        ax.axhline(stats.threshold, color="#b03a48", lw=0.8, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel(f"jumps per {stats.window:g}")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    return _save(fig, out)
