"""Mass, energy and reflection diagnostics for network states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fd import GridSpec, NetworkState
from .network import StarNetwork

CSV_COLUMNS = (
    "time",
    "mass",
    "delta_mass_percent",
    "energy",
    "energy_rate_formula",
    "junction_value",
)


@dataclass
class DiagnosticsRecord:
    time: float
    mass: float
    delta_mass_percent: float
    energy: float
    energy_rate_formula: float
    junction_value: float

    def row(self) -> tuple[float, ...]:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def mass(state: NetworkState, grid: GridSpec) -> float:
    """Sum over edges of the trapezoid integral of u."""
    return float(sum(np.trapezoid(v, dx=grid.dx) for v in state.per_edge_values))


def _edge_slopes(v: np.ndarray, dx: float) -> np.ndarray:
    # centred inside, one-sided at the junction and the far end
    return np.gradient(v, dx, edge_order=1)


def energy(state: NetworkState, network: StarNetwork, grid: GridSpec) -> float:
    """0.5 * sum_i int (u_i^2 + mu_i^2 u_i,x^2) dx."""
    total = 0.0
    for edge, v in zip(network.edges, state.per_edge_values):
        ux = _edge_slopes(v, grid.dx)
        total += np.trapezoid(v**2 + edge.mu**2 * ux**2, dx=grid.dx)
    return 0.5 * float(total)


def dissipation(state: NetworkState, network: StarNetwork, grid: GridSpec) -> float:
    """sum_i nu_i int u_i,x^2 dx."""
    total = 0.0
    for edge, v in zip(network.edges, state.per_edge_values):
        if edge.nu:
            ux = _edge_slopes(v, grid.dx)
            total += edge.nu * np.trapezoid(ux**2, dx=grid.dx)
    return float(total)


def junction_energy_flux(network: StarNetwork, h: float) -> float:
    """-h^2 sum_i sigma_i (alpha_i/2 + gamma_i h^p / ((p+1)(p+2)))."""
    p = network.p
    h = np.float64(h)
    bracket = sum(
        e.sigma * (e.alpha / 2.0 + e.gamma * h**p / ((p + 1) * (p + 2))) for e in network.edges
    )
    return -(h**2) * bracket


def energy_rate_rhs(state: NetworkState, network: StarNetwork, grid: GridSpec) -> float:
    """Analytic dE/dt: junction flux term minus viscous dissipation."""
    return junction_energy_flux(network, state.junction_value) - dissipation(
        state, network, grid
    )


def make_record(
    state: NetworkState, network: StarNetwork, grid: GridSpec, mass0: float | None
) -> DiagnosticsRecord:
    with np.errstate(over="ignore", invalid="ignore"):
        return _record(state, network, grid, mass0)


def _record(state, network, grid, mass0):
    m = mass(state, grid)
    if mass0 is None:
        mass0 = m
    if mass0 != 0:
        dm = 100.0 * abs(m - mass0) / mass0
    else:
        dm = math.nan
    return DiagnosticsRecord(
        time=state.time,
        mass=m,
        delta_mass_percent=dm,
        energy=energy(state, network, grid),
        energy_rate_formula=energy_rate_rhs(state, network, grid),
        junction_value=state.junction_value,
    )


@dataclass
class MassSeries:
    times: np.ndarray
    values: np.ndarray
    relative: bool
    """True when ``values`` are percent errors, False for absolute drift."""

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def argmax_time(self) -> float:
        return float(self.times[int(np.argmax(self.values))])

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))


def delta_mass_series(records: Sequence[DiagnosticsRecord]) -> MassSeries:
    """Percent mass error against the first record.

    When the initial mass is zero the percent error is undefined; the series
    then carries the absolute drift ``|M(t) - M(0)|`` with ``relative=False``.
    """
    if not records:
        raise ValueError("no diagnostics records")
    t = np.array([r.time for r in records])
    m = np.array([r.mass for r in records])
    m0 = m[0]
    if m0 == 0:
        return MassSeries(t, np.abs(m - m0), relative=False)
    return MassSeries(t, 100.0 * np.abs(m - m0) / m0, relative=True)


class Recorder:
    """Observer collecting diagnostics (and optionally field snapshots)."""

    def __init__(self, network: StarNetwork, grid: GridSpec, keep_states: bool = False):
        self.network = network
        self.grid = grid
        self.records: list[DiagnosticsRecord] = []
        self.states: list[NetworkState] = []
        self.keep_states = keep_states
        self._mass0: float | None = None

    def __call__(self, t: float, state: NetworkState) -> None:
        rec = make_record(state, self.network, self.grid, self._mass0)
        if self._mass0 is None:
            self._mass0 = rec.mass
        self.records.append(rec)
        if self.keep_states:
            self.states.append(state.copy())


@dataclass
class ReflectionVerdict:
    reflected: bool
    min_excursion: float
    location: float
    crossing_time: float | None = None
    run_length: int = 0


def detect_reflection(
    history: Sequence[NetworkState],
    incoming_edge_index: int = 0,
    threshold: float = 0.02,
    sustain: int = 5,
    dx: float | None = None,
) -> ReflectionVerdict:
    """Look for a depression that detaches from the junction on the incoming edge.

    The incident amplitude is the maximum of the first snapshot.  Snapshots
    are scanned from the first one whose global maximum lies off the incoming
    edge (the peak has crossed).  A snapshot counts when the incoming edge dips
    to ``-threshold * amplitude`` or below and its deepest point sits further
    from the junction than in the previous snapshot; ``sustain`` consecutive
    counting snapshots mean a reflected wave.
    """
    if not history:
        raise ValueError("empty history")
    layout = history[0].layout
    if dx is None:
        dx = layout.dx
    amplitude = float(np.max(history[0].u))
    level = -threshold * amplitude

    def peak_edge(state: NetworkState) -> int:
        k = int(np.argmax(state.u))
        for i, idx in enumerate(layout.index):
            if k in idx[1:]:
                return i
        return incoming_edge_index

    crossed_at = None
    for n, s in enumerate(history):
        if peak_edge(s) != incoming_edge_index:
            crossed_at = n
            break
    if crossed_at is None:
        return ReflectionVerdict(False, 0.0, math.nan, None, 0)

    best_min, best_loc = 0.0, math.nan
    run = longest = 0
    prev_loc = None
    for s in history[crossed_at:]:
        v = s.edge(incoming_edge_index)
        k = int(np.argmin(v))
        depth, loc = float(v[k]), k * dx
        if depth < best_min:
            best_min, best_loc = depth, loc
        counts = depth <= level and prev_loc is not None and loc > prev_loc
        run = run + 1 if counts else 0
        longest = max(longest, run)
        prev_loc = loc if depth <= level else None
    return ReflectionVerdict(
        longest >= sustain, best_min, best_loc, history[crossed_at].time, longest
    )
