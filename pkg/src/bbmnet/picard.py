"""Fixed-point (Picard) oracle for short-time solutions on a star network.

Each edge is written as an integral equation on ``[0, y_max] x [0, t]`` using
the half-line Green's function; the edges are coupled only through the
junction value ``h(t)``, which solves a linear ODE in closed form.  All
integrals use uniform trapezoid rules, so one application of the map is a
handful of dense matrix products.

Meant for coarse grids and short times, as an independent check on the
finite-difference solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import EdgeSpec, StarNetwork, advective_flux
from .waves import GreensSpec, greens_G, kernel_K


class PicardConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float, residuals: list[float]):
        self.iterations = iterations
        self.residual = residual
        self.residuals = residuals
        super().__init__(
            f"fixed-point iteration did not converge in {iterations} iterations "
            f"(last residual {residual:.3e}); try a shorter t_final"
        )


@dataclass(frozen=True)
class JunctionODEParams:
    mu_star: float
    nu_star: float

    @classmethod
    def from_network(cls, network: StarNetwork) -> "JunctionODEParams":
        mu = network.coefficient("mu")
        nu = network.coefficient("nu")
        return cls(float(mu.sum()), float((nu / mu).sum()))

    @property
    def decay(self) -> float:
        return self.nu_star / self.mu_star


@dataclass(frozen=True)
class QuadratureGrid:
    y_max: float
    y_step: float
    t_step: float

    def __post_init__(self) -> None:
        if not (self.y_step > 0 and self.t_step > 0 and self.y_max > 0):
            raise ValueError("y_max, y_step and t_step must be positive")

    @property
    def y(self) -> np.ndarray:
        n = int(round(self.y_max / self.y_step))
        return np.arange(n + 1) * self.y_step

    def times(self, t_final: float) -> np.ndarray:
        m = int(round(t_final / self.t_step))
        if abs(m * self.t_step - t_final) > 1e-9 * max(t_final, 1.0):
            raise ValueError(f"t_final={t_final} is not a multiple of t_step={self.t_step}")
        return np.arange(m + 1) * self.t_step

    def check_covers(self, network: StarNetwork) -> None:
        mu_max = max(e.mu for e in network.edges)
        if self.y_max < 10 * mu_max:
            raise ValueError(f"y_max={self.y_max} must be at least 10 * max(mu) = {10 * mu_max}")


def default_y_max(network: StarNetwork, support_radius: float) -> float:
    return 10.0 * max(e.mu for e in network.edges) + support_radius


def kernel_tail_bound(network: StarNetwork, y_max: float) -> float:
    """Largest weight ``exp(-y_max / mu_i)`` dropped by truncating the integrals."""
    return max(math.exp(-y_max / e.mu) for e in network.edges)


def _trapezoid_weights(n: int, step: float) -> np.ndarray:
    w = np.full(n, step)
    w[0] = w[-1] = step / 2.0
    return w


def _time_operator(t: np.ndarray, rate: float) -> np.ndarray:
    """Matrix ``T`` with ``(g @ T.T)[:, m] ~ int_0^t_m exp(-rate (t_m - s)) g(s) ds``."""
    n = t.size
    T = np.zeros((n, n))
    dt = t[1] - t[0] if n > 1 else 0.0
    for m in range(1, n):
        w = _trapezoid_weights(m + 1, dt)
        T[m, : m + 1] = w * np.exp(-rate * (t[m] - t[: m + 1]))
    return T


class _EdgeOperators:
    """Precomputed quadrature matrices for one edge."""

    def __init__(self, edge: EdgeSpec, y: np.ndarray, t: np.ndarray, x: np.ndarray | None = None):
        self.edge = edge
        x = y if x is None else x
        spec = GreensSpec(edge.mu)
        wy = _trapezoid_weights(y.size, y[1] - y[0])
        X, Y = np.meshgrid(x, y, indexing="ij")
        K = kernel_K(spec, X, Y)
        # the jump of K sits on the diagonal; at the ends of [0, y_max] only the
        # one-sided limit from inside the interval belongs to the integral
        jump = np.exp(-(X + Y) / edge.mu) / (2.0 * edge.mu**2)
        half = 1.0 / (2.0 * edge.mu**2)
        K = np.where((X == Y) & (Y == y[0]), jump - half, K)
        K = np.where((X == Y) & (Y == y[-1]), jump + half, K)
        self.K = K * wy
        self.G = greens_G(spec, X, Y) * wy
        self.rate = edge.nu / edge.mu**2
        self.T = _time_operator(t, self.rate)
        # weights for the junction forcing: exp(-y / mu) dy
        self.junction_w = wy * np.exp(-y / edge.mu)

    def adv(self, F: np.ndarray) -> np.ndarray:
        return (self.K @ F) @ self.T.T

    def visc(self, U: np.ndarray) -> np.ndarray:
        if self.rate == 0:
            return np.zeros((self.K.shape[0], U.shape[1]))
        return self.rate * (self.G @ U) @ self.T.T


def _samples_at(u: np.ndarray, t_grid: np.ndarray, t: float) -> int:
    m = int(round(t / (t_grid[1] - t_grid[0]))) if t_grid.size > 1 else 0
    if m < 0 or m >= t_grid.size or abs(t_grid[m] - t) > 1e-9:
        raise ValueError(f"t={t} is not a node of the quadrature time grid")
    return m


def op_B_adv(
    edge: EdgeSpec, p: int, u: np.ndarray, x: float, t: float, q: QuadratureGrid
) -> float:
    """Advective integral operator at one point.

    ``u`` holds samples on ``q.y`` (rows) by the time grid ``0, t_step, ...``
    (columns); ``t`` must be one of those times.
    """
    y = q.y
    t_grid = np.arange(u.shape[1]) * q.t_step
    m = _samples_at(u, t_grid, t)
    if m == 0:
        return 0.0
    ops = _EdgeOperators(edge, y, t_grid[: m + 1], x=np.array([float(x)]))
    F = edge.alpha * u[:, : m + 1] + edge.gamma * u[:, : m + 1] ** (p + 1) / (p + 1)
    return float(ops.adv(F)[0, m])


def op_B_visc(edge: EdgeSpec, u: np.ndarray, x: float, t: float, q: QuadratureGrid) -> float:
    """Viscous integral operator at one point (zero when nu = 0)."""
    if edge.nu == 0:
        return 0.0
    y = q.y
    t_grid = np.arange(u.shape[1]) * q.t_step
    m = _samples_at(u, t_grid, t)
    if m == 0:
        return 0.0
    ops = _EdgeOperators(edge, y, t_grid[: m + 1], x=np.array([float(x)]))
    return float(ops.visc(u[:, : m + 1])[0, m])


def _junction_series(
    network: StarNetwork,
    U: Sequence[np.ndarray],
    phi0: float,
    t: np.ndarray,
    ops: Sequence[_EdgeOperators],
) -> np.ndarray:
    jp = JunctionODEParams.from_network(network)
    forcing = np.zeros(t.size)
    for i, (edge, Ui, op) in enumerate(zip(network.edges, U, ops)):
        integrand = edge.sigma * advective_flux(network, i, Ui) - (edge.nu / edge.mu) * Ui
        forcing += (op.junction_w @ integrand) / (edge.mu * jp.mu_star)
    T = _time_operator(t, jp.decay)
    return phi0 * np.exp(-jp.decay * t) - T @ forcing


def junction_value_h(
    network: StarNetwork,
    u: Sequence[np.ndarray],
    phi0: float,
    t: float,
    q: QuadratureGrid,
) -> float:
    """Junction value from the closed-form solution of its linear ODE."""
    y = q.y
    t_grid = np.arange(u[0].shape[1]) * q.t_step
    m = _samples_at(u[0], t_grid, t)
    ops = [_EdgeOperators(e, y, t_grid[: m + 1], x=y[:1]) for e in network.edges]
    return float(_junction_series(network, [ui[:, : m + 1] for ui in u], phi0, t_grid[: m + 1], ops)[m])


@dataclass
class PicardResult:
    y: np.ndarray
    t: np.ndarray
    values: list[np.ndarray]
    """Per-edge samples, shape ``(len(y), len(t))``."""
    junction: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)

    def at_final(self) -> list[np.ndarray]:
        return [v[:, -1] for v in self.values]


def picard_solve(
    network: StarNetwork,
    phi: Sequence[np.ndarray],
    t_final: float,
    q: QuadratureGrid,
    tol: float = 1e-8,
    max_iters: int = 200,
) -> PicardResult:
    """Iterate the fixed-point map from the time-constant extension of ``phi``.

    ``phi[i]`` samples edge ``i`` on ``q.y``; all edges must agree at y = 0
    and ``q.y_max`` must be at least ``10 * max(mu_i)``.
    Raises :class:`PicardConvergenceError` when successive iterates still
    differ by more than ``tol`` (sup norm) after ``max_iters`` sweeps.
    """
    q.check_covers(network)
    y = q.y
    t = q.times(t_final)
    phi = [np.asarray(v, dtype=float) for v in phi]
    for i, v in enumerate(phi):
        if v.shape != y.shape:
            raise ValueError(f"phi[{i}] has {v.size} samples, expected {y.size}")
    phi0 = phi[0][0]
    if any(abs(v[0] - phi0) > 1e-12 * max(1.0, abs(phi0)) for v in phi):
        raise ValueError("initial data must be continuous at the junction")

    ops = [_EdgeOperators(e, y, t) for e in network.edges]
    decay = [np.exp(-op.rate * t) for op in ops]
    ramps = [np.exp(-y / e.mu) for e in network.edges]

    U = [np.repeat(v[:, None], t.size, axis=1) for v in phi]
    residuals: list[float] = []
    for it in range(1, max_iters + 1):
        h = _junction_series(network, U, phi0, t, ops)
        new = []
        for i, (edge, op) in enumerate(zip(network.edges, ops)):
            F = advective_flux(network, i, U[i])
            boundary = (h - phi0 + phi0 * (1.0 - decay[i]))[None, :] * ramps[i][:, None]
            Ui = phi[i][:, None] * decay[i][None, :] + boundary
            Ui = Ui + edge.sigma * op.adv(F) + op.visc(U[i])
            new.append(Ui)
        res = max(float(np.max(np.abs(a - b))) for a, b in zip(new, U))
        residuals.append(res)
        U = new
        if not np.isfinite(res):
            raise PicardConvergenceError(it, res, residuals)
        if res < tol:
            h = _junction_series(network, U, phi0, t, ops)
            return PicardResult(y, t, U, h, it, residuals)
    raise PicardConvergenceError(max_iters, residuals[-1], residuals)
