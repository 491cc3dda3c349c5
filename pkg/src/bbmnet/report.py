"""CSV artifacts, their schema file and matplotlib figures."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import CSV_COLUMNS
from .fd import Layout, NetworkState

SCHEMA: dict[str, list[tuple[str, str]]] = {
    "diagnostics.csv": [
        ("time", "simulation time"),
        ("mass", "sum over edges of the trapezoid integral of u"),
        ("delta_mass_percent", "100*|M(t)-M(0)|/M(0); absolute drift |M(t)-M(0)| when M(0)=0"),
        ("energy", "0.5 * sum over edges of the integral of u^2 + mu^2 u_x^2"),
        ("energy_rate_formula", "analytic dE/dt from the junction value and viscous dissipation"),
        ("junction_value", "shared junction sample h(t)"),
    ],
    "summary.csv": [
        ("key", "summary quantity name"),
        ("value", "its value"),
    ],
    "fields.csv": [
        ("time", "snapshot time"),
        ("u_<k>", "solution at global node k; see grid.csv"),
    ],
    "grid.csv": [
        ("k", "global node index"),
        ("edge", "edge index (0 is the incoming edge)"),
        ("y", "distance from the junction along the edge"),
        ("x", "coordinate on the line through edge 0 (junction at L0)"),
    ],
    "sweep.csv": [
        ("value", "swept parameter value"),
        ("status", "ok, unstable or error"),
        ("max_delta_mass", "largest mass error over the run"),
        ("reflected", "reflection verdict (true/false/n/a)"),
        ("min_excursion", "deepest value seen on the incoming edge after the crossing"),
        ("message", "error text for failed jobs"),
    ],
    "verify.csv": [
        ("key", "comparison quantity name"),
        ("value", "its value"),
    ],
    "residuals.csv": [
        ("iteration", "Picard sweep number"),
        ("residual", "sup-norm change between successive iterates"),
    ],
}


def fmt(v: object) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else str(float(v))
    return str(v)


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_key_values(path: Path, items: dict[str, object]) -> Path:
    return write_rows(path, ("key", "value"), items.items())


def write_diagnostics(path: Path, records) -> Path:
    return write_rows(path, CSV_COLUMNS, (r.row() for r in records))


def write_fields(directory: Path, layout: Layout, states: Sequence[NetworkState]) -> list[Path]:
    x = layout.physical_coordinates()
    grid_rows = []
    for i, idx in enumerate(layout.index):
        for j, k in enumerate(idx):
            if i > 0 and j == 0:
                continue
            grid_rows.append((int(k), i, j * layout.dx, x[k]))
    grid_rows.sort()
    header = ["time"] + [f"u_{k}" for k in range(layout.size)]
    return [
        write_rows(directory / "grid.csv", ("k", "edge", "y", "x"), grid_rows),
        write_rows(directory / "fields.csv", header, ([s.time, *s.u] for s in states)),
    ]


def write_schema(directory: Path, files: Iterable[str]) -> Path:
    rows = [(f, col, desc) for f in files for col, desc in SCHEMA[f]]
    return write_rows(directory / "schema.csv", ("file", "column", "description"), rows)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_fields(path: Path, layout: Layout, states: Sequence[NetworkState]) -> Path:
    """Space-time contour plot; one panel per edge beyond the two-edge line."""
    plt = _pyplot()
    t = np.array([s.time for s in states])
    U = np.stack([s.u for s in states])
    if len(layout.index) == 2:
        x = layout.physical_coordinates()
        order = np.argsort(x, kind="stable")
        fig, ax = plt.subplots(figsize=(7, 4.5))
        cs = ax.contourf(x[order], t, U[:, order], levels=30, cmap="viridis")
        ax.axvline(x[layout.junction], color="w", lw=0.8, ls="--")
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        fig.colorbar(cs, ax=ax, label="u")
    else:
        n = len(layout.index)
        fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 4.5), sharey=True)
        for i, (ax, idx) in enumerate(zip(axes, layout.index)):
            y = np.arange(idx.size) * layout.dx
            cs = ax.contourf(y, t, U[:, idx], levels=30, cmap="viridis")
            ax.set_title(f"edge {i}")
            ax.set_xlabel("distance from junction")
        axes[0].set_ylabel("t")
        fig.colorbar(cs, ax=list(axes), label="u")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_mass_error(path: Path, series) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(series.times, series.values, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("mass error (%)" if series.relative else "|M(t) - M(0)|")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
