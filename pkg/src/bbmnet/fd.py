"""Implicit leapfrog finite-difference solver for gBBMB on a star network.

Every edge is discretised in its own coordinate ``y`` (distance from the
junction) with the Eilbeck-McGuire stencil; the incoming edge carries the
advection sign ``sigma = -1``.  Dissipation is Crank-Nicolson averaged over
the two leapfrog levels ``n - 1`` and ``n + 1``, so the implicit matrix does
not depend on time and is factorised once.

All edges share one junction unknown.  Edge 0 is stored reversed, followed
by the junction and then the outgoing edges, so for two edges the system
matrix is tridiagonal and the global vector is the physical line read from
the far end of the incoming edge to the far end of the outgoing one.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .network import JunctionCondition, StarNetwork, advective_flux, advective_speed

logger = logging.getLogger(__name__)


class InstabilityError(RuntimeError):
    def __init__(self, step: int, time: float, max_abs: float, last_stable_time: float):
        self.step = step
        self.time = time
        self.max_abs = max_abs
        self.last_stable_time = last_stable_time
        super().__init__(
            f"non-finite solution at step {step} (t={time:.6g}); "
            f"max|u| before failure {max_abs:.6g}, last stable time {last_stable_time:.6g}"
        )


class Bootstrap(enum.Enum):
    AUTO = "auto"
    EXACT_TRANSLATE = "exact"
    SEMI_IMPLICIT = "semi-implicit"


@dataclass(frozen=True)
class GridSpec:
    dx: float
    dt: float
    horizon: float

    def __post_init__(self) -> None:
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError(f"dx and dt must be positive, got dx={self.dx}, dt={self.dt}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def nodes(self, length: float) -> int:
        """Number of intervals on an edge of the given length."""
        m = int(round(length / self.dx))
        if m < 2 or abs(m * self.dx - length) > 1e-9 * max(length, 1.0):
            raise ValueError(f"edge length {length} is not a multiple (>= 2) of dx={self.dx}")
        return m


class Layout:
    """Index bookkeeping between per-edge arrays and the global vector."""

    def __init__(self, network: StarNetwork, grid: GridSpec):
        self.sizes = [grid.nodes(e.truncation_length) for e in network.edges]
        m0 = self.sizes[0]
        self.junction = m0
        self.index: list[np.ndarray] = [np.arange(m0, -1, -1)]
        offset = m0 + 1
        for m in self.sizes[1:]:
            self.index.append(np.concatenate(([m0], np.arange(offset, offset + m))))
            offset += m
        self.size = offset
        self.dx = grid.dx

    def physical_coordinates(self) -> np.ndarray:
        """Coordinate along the line through edge 0 and the outgoing edges.

        Edge 0 spans ``[0, L0]`` with the junction at ``L0``; every outgoing
        edge spans ``[L0, L0 + Li]``.
        """
        x = np.empty(self.size)
        L0 = self.sizes[0] * self.dx
        for i, idx in enumerate(self.index):
            y = np.arange(len(idx)) * self.dx
            x[idx] = L0 - y if i == 0 else L0 + y
        return x


@dataclass
class NetworkState:
    """Samples on every edge at one time level, sharing one junction value."""

    u: np.ndarray
    layout: Layout
    time: float = 0.0

    def edge(self, i: int) -> np.ndarray:
        """Samples of edge ``i`` from the junction (index 0) outwards."""
        return self.u[self.layout.index[i]]

    @property
    def per_edge_values(self) -> list[np.ndarray]:
        return [self.edge(i) for i in range(len(self.layout.index))]

    @property
    def junction_value(self) -> float:
        return float(self.u[self.layout.junction])

    def copy(self) -> "NetworkState":
        return NetworkState(self.u.copy(), self.layout, self.time)

    @classmethod
    def from_edges(cls, values: Sequence[np.ndarray], layout: Layout, time: float = 0.0):
        """Build a state from per-edge arrays; junction samples must agree."""
        u = np.empty(layout.size)
        h = values[0][0]
        for i, (v, idx) in enumerate(zip(values, layout.index)):
            v = np.asarray(v, dtype=float)
            if v.shape != idx.shape:
                raise ValueError(f"edge {i}: expected {idx.size} samples, got {v.size}")
            if v[0] != h:
                raise ValueError(f"edge {i} junction sample {v[0]} differs from {h}")
            u[idx] = v
        return cls(u, layout, time)

    @classmethod
    def zeros(cls, layout: Layout, time: float = 0.0) -> "NetworkState":
        return cls(np.zeros(layout.size), layout, time)


@dataclass
class SteppingWorkspace:
    network: StarNetwork
    grid: GridSpec
    layout: Layout
    matrix: sp.csc_matrix
    factorization: object
    previous_state: NetworkState | None = None
    current_state: NetworkState | None = None
    steps_taken: int = 0
    _rows: list[np.ndarray] = field(default_factory=list, repr=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.factorization.solve(rhs)


def _boundary_pinned(u: np.ndarray, layout: Layout) -> bool:
    return all(u[idx[-1]] == 0.0 for idx in layout.index)


def assemble_system(network: StarNetwork, grid: GridSpec) -> SteppingWorkspace:
    """Build and factorise the constant implicit matrix.

    Interior row of edge ``i``:
    ``a u[k-1] - (2 a + (dx/mu)^2) u[k] + a u[k+1]`` with
    ``a = 1 + nu dt / mu^2``; the far-end row pins ``u = 0``; the junction
    row is ``sum_i mu_i^2 (u_i[1] - h)``, shared by both junction conditions
    (only the right-hand side differs).
    """
    layout = Layout(network, grid)
    dx, dt = grid.dx, grid.dt
    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    J = layout.junction
    for edge, idx in zip(network.edges, layout.index):
        a = 1.0 + edge.nu * dt / edge.mu**2
        r = (dx / edge.mu) ** 2
        m = idx.size - 1
        for k in range(1, m):
            put(idx[k], idx[k - 1], a)
            put(idx[k], idx[k], -2.0 * a - r)
            put(idx[k], idx[k + 1], a)
        put(idx[m], idx[m], 1.0)
        put(J, idx[1], edge.mu**2)
        put(J, J, -edge.mu**2)

    matrix = sp.csc_matrix((vals, (rows, cols)), shape=(layout.size, layout.size))
    # duplicates on the junction diagonal are summed by the constructor
    try:
        lu = splu(matrix, permc_spec="NATURAL" if network.n_edges == 2 else "COLAMD")
    except RuntimeError as exc:  # pragma: no cover - mu > 0 keeps the matrix regular
        raise RuntimeError(
            f"singular system for dx={dx}, dt={dt}, "
            f"mu={network.coefficient('mu')}, nu={network.coefficient('nu')}"
        ) from exc
    return SteppingWorkspace(network, grid, layout, matrix, lu)


def _junction_forcing(network: StarNetwork, state: NetworkState, dx: float) -> float:
    """sum_i [sigma_i f_i(h) - nu_i (u_i[1] - h) / dx] at one time level."""
    # numpy scalar so that a blow-up overflows to inf instead of raising
    h = np.float64(state.junction_value)
    total = 0.0
    for i, edge in enumerate(network.edges):
        v1 = state.u[state.layout.index[i][1]]
        total += edge.sigma * advective_flux(network, i, h) - edge.nu * (v1 - h) / dx
    return total


def _junction_history(network: StarNetwork, state: NetworkState) -> float:
    h = state.junction_value
    return sum(
        e.mu**2 * (state.u[state.layout.index[i][1]] - h) for i, e in enumerate(network.edges)
    )


def interface_rhs(
    network: StarNetwork, state_n: NetworkState, state_nm1: NetworkState, grid: GridSpec
) -> float:
    """Right-hand side of the discrete junction row for the leapfrog step.

    For two edges with the junction at array index ``j`` this equals
    ``mu1^2 u[j-1] - (mu1^2 + mu2^2) u[j] + mu2^2 u[j+1]`` at level ``n-1``
    plus ``2 dx dt [f2(u_j) - f1(u_j) - (nu1 u[j-1] - (nu1+nu2) u[j] + nu2 u[j+1]) / dx]``
    at level ``n``.  With the Kirchhoff condition the row is homogeneous.
    """
    if network.junction_condition is JunctionCondition.KIRCHHOFF:
        return 0.0
    return _junction_history(network, state_nm1) + 2.0 * grid.dx * grid.dt * _junction_forcing(
        network, state_n, grid.dx
    )


def _interior_rhs(
    ws: SteppingWorkspace, u_n: np.ndarray, u_old: np.ndarray, window: float, dissipative: bool
) -> np.ndarray:
    """Edge rows of the right-hand side.

    ``window`` is the time span between ``u_old`` and the new level (2 dt for
    leapfrog, dt for the first step); ``dissipative`` selects the leapfrog
    Crank-Nicolson share of ``nu`` on the old level.
    """
    network, grid, layout = ws.network, ws.grid, ws.layout
    dx, dt = grid.dx, grid.dt
    rhs = np.zeros(layout.size)
    for i, (edge, idx) in enumerate(zip(network.edges, layout.index)):
        vn = u_n[idx]
        vo = u_old[idx]
        r = (dx / edge.mu) ** 2
        b = 1.0 - edge.nu * dt / edge.mu**2 if dissipative else 1.0
        speed = advective_speed(network, i, vn[1:-1])
        adv = (window / 2.0) * dx / edge.mu**2 * edge.sigma * speed * (vn[2:] - vn[:-2])
        hist = b * (vo[:-2] - 2.0 * vo[1:-1] + vo[2:]) - r * vo[1:-1]
        rhs[idx[1:-1]] = adv + hist
    return rhs


def _check_finite(ws: SteppingWorkspace, u_new: np.ndarray, t_new: float) -> None:
    if not np.all(np.isfinite(u_new)):
        prev = ws.current_state
        raise InstabilityError(
            ws.steps_taken + 1,
            t_new,
            float(np.max(np.abs(prev.u))) if prev is not None else float("nan"),
            prev.time if prev is not None else 0.0,
        )


def bootstrap_first_level(
    state0: NetworkState,
    network: StarNetwork,
    grid: GridSpec,
    exact: Callable[[float], NetworkState] | None = None,
    workspace: SteppingWorkspace | None = None,
) -> NetworkState:
    """Second history level at ``t = dt``.

    With ``exact`` (a callable returning the analytic state at a given time)
    the exact translate is sampled.  Otherwise one semi-implicit step is taken:
    backward Euler on dispersion and dissipation, explicit advection.
    """
    t1 = state0.time + grid.dt
    if exact is not None:
        s = exact(t1)
        s.time = t1
        return s
    ws = workspace if workspace is not None else assemble_system(network, grid)
    u0 = state0.u
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = _interior_rhs(ws, u0, u0, grid.dt, dissipative=False)
        if network.junction_condition is JunctionCondition.MASS_CONSERVATION:
            rhs[ws.layout.junction] = _junction_history(network, state0) + grid.dx * grid.dt * (
                _junction_forcing(network, state0, grid.dx)
            )
        u1 = ws.solve(rhs)
    _check_finite(ws, u1, t1)
    return NetworkState(u1, ws.layout, t1)


def step(workspace: SteppingWorkspace) -> NetworkState:
    """Advance the leapfrog recurrence held by ``workspace`` by one ``dt``."""
    ws = workspace
    prev, cur = ws.previous_state, ws.current_state
    if prev is None or cur is None:
        raise RuntimeError("workspace needs two history levels before stepping")
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = _interior_rhs(ws, cur.u, prev.u, 2.0 * ws.grid.dt, dissipative=True)
        rhs[ws.layout.junction] = interface_rhs(ws.network, cur, prev, ws.grid)
        u_new = ws.solve(rhs)
    # n * dt rather than a running sum, so snapshot times print cleanly
    t_new = (round(cur.time / ws.grid.dt) + 1) * ws.grid.dt
    _check_finite(ws, u_new, t_new)
    new = NetworkState(u_new, ws.layout, t_new)
    ws.previous_state, ws.current_state = cur, new
    ws.steps_taken += 1
    return new


Observer = Callable[[float, NetworkState], None]


def run(
    network: StarNetwork,
    grid: GridSpec,
    initial: NetworkState,
    observers: Iterable[Observer] = (),
    stride: int = 1,
    exact: Callable[[float], NetworkState] | None = None,
    workspace: SteppingWorkspace | None = None,
) -> NetworkState:
    """Integrate from ``initial`` to ``grid.horizon``.

    Observers are called with ``(time, state)`` at t = 0 and every ``stride``
    steps after that, and always at the final time.  ``exact`` selects the
    exact-translate bootstrap; otherwise the semi-implicit one is used.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    observers = list(observers)
    ws = workspace if workspace is not None else assemble_system(network, grid)
    if initial.u.shape != (ws.layout.size,):
        raise ValueError("initial state does not match the network/grid layout")
    if not _boundary_pinned(initial.u, ws.layout):
        raise ValueError("initial state must vanish at the far end of every edge")

    def notify(state: NetworkState) -> None:
        for obs in observers:
            obs(state.time, state)

    n_steps = grid.n_steps
    state = initial.copy()
    notify(state)
    if n_steps == 0:
        return state
    first = bootstrap_first_level(state, network, grid, exact=exact, workspace=ws)
    first.u[[idx[-1] for idx in ws.layout.index]] = 0.0
    ws.previous_state, ws.current_state = state, first
    ws.steps_taken = 1
    if n_steps == 1 or stride == 1:
        notify(first)
    for n in range(2, n_steps + 1):
        state = step(ws)
        if n % stride == 0 or n == n_steps:
            notify(state)
    return ws.current_state
