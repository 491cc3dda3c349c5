"""Run orchestration shared by the CLI and the test-suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .config import ExperimentConfig, SolitaryIC, initial_state, solitary_state, wave_params
from .diagnostics import (
    DiagnosticsRecord,
    MassSeries,
    Recorder,
    ReflectionVerdict,
    delta_mass_series,
    detect_reflection,
)
from .fd import Bootstrap, GridSpec, InstabilityError, Layout, NetworkState, run
from .picard import (
    PicardConvergenceError,
    PicardResult,
    QuadratureGrid,
    default_y_max,
    kernel_tail_bound,
    picard_solve,
)


@dataclass
class RunResult:
    config: ExperimentConfig
    layout: Layout
    records: list[DiagnosticsRecord]
    states: list[NetworkState]
    mass_series: MassSeries
    reflection: ReflectionVerdict | None
    instability: InstabilityError | None = None

    @property
    def completed(self) -> bool:
        return self.instability is None

    @property
    def final_energy(self) -> float:
        return self.records[-1].energy if self.records else math.nan

    def summary(self) -> dict[str, object]:
        ms = self.mass_series
        out: dict[str, object] = {
            "status": "ok" if self.completed else "unstable",
            "final_time": self.records[-1].time if self.records else 0.0,
            "mass_error_kind": "percent" if ms.relative else "absolute",
            "max_delta_mass": ms.max,
            "max_delta_mass_time": ms.argmax_time if ms.values.size else math.nan,
            "initial_mass": self.records[0].mass if self.records else math.nan,
            "final_energy": self.final_energy,
        }
        if self.reflection is None:
            out["reflected"] = "n/a"
            out["min_excursion"] = math.nan
            out["min_excursion_location"] = math.nan
        else:
            out["reflected"] = str(self.reflection.reflected).lower()
            out["min_excursion"] = self.reflection.min_excursion
            out["min_excursion_location"] = self.reflection.location
        if self.instability is not None:
            out["unstable_step"] = self.instability.step
            out["last_stable_time"] = self.instability.last_stable_time
        return out


def resolve_bootstrap(config: ExperimentConfig) -> Bootstrap:
    """Exact translate only where it is a true solution of the network problem."""
    if config.bootstrap is not Bootstrap.AUTO:
        return config.bootstrap
    edges = config.network.edges
    identical = all(
        (e.mu, e.alpha, e.gamma, e.nu) == (edges[0].mu, edges[0].alpha, edges[0].gamma, edges[0].nu)
        for e in edges
    )
    if isinstance(config.initial_condition, SolitaryIC) and identical and edges[0].nu == 0:
        return Bootstrap.EXACT_TRANSLATE
    return Bootstrap.SEMI_IMPLICIT


def exact_translate(config: ExperimentConfig, layout: Layout) -> Callable[[float], NetworkState] | None:
    """Analytic translate used by the exact bootstrap, or None if unavailable."""
    if resolve_bootstrap(config) is not Bootstrap.EXACT_TRANSLATE:
        return None
    params = wave_params(config)
    if params is None:
        return None
    return lambda t: solitary_state(params, layout, t)


def run_experiment(config: ExperimentConfig, keep_states: bool | None = None) -> RunResult:
    """Integrate ``config`` and collect diagnostics at the configured stride.

    Snapshots are retained when field output is requested or a reflection
    verdict is needed (solitary initial data on the incoming edge).
    """
    network, grid = config.network, config.grid
    layout = Layout(network, grid)
    state0 = initial_state(config, layout)
    ic = config.initial_condition
    wants_verdict = isinstance(ic, SolitaryIC) and ic.host_edge == 0
    if keep_states is None:
        keep_states = config.outputs.fields or config.outputs.figures or wants_verdict
    rec = Recorder(network, grid, keep_states=keep_states)
    failure = None
    try:
        run(
            network,
            grid,
            state0,
            [rec],
            stride=config.outputs.stride,
            exact=exact_translate(config, layout),
        )
    except InstabilityError as exc:
        failure = exc
    verdict = None
    if wants_verdict and rec.states:
        verdict = detect_reflection(rec.states, 0)
    return RunResult(config, layout, rec.records, rec.states, delta_mass_series(rec.records), verdict, failure)


@dataclass
class VerifyResult:
    t_final: float
    sup_difference: float
    h_picard: float
    h_fd: float
    iterations: int
    residuals: list[float]
    kernel_tail: float
    converged: bool
    picard: PicardResult | None = field(default=None, repr=False)

    def report(self) -> dict[str, object]:
        return {
            "t_final": self.t_final,
            "converged": str(self.converged).lower(),
            "sup_difference": self.sup_difference,
            "h_picard": self.h_picard,
            "h_fd": self.h_fd,
            "iterations": self.iterations,
            "final_residual": self.residuals[-1] if self.residuals else math.nan,
            "kernel_tail_bound": self.kernel_tail,
        }


def oracle_grid(
    config: ExperimentConfig, y_step: float, t_step: float, y_max: float | None = None
) -> QuadratureGrid:
    """Oracle grid; by default ``y_max`` = 10 max(mu) + support radius of the data.

    The support radius is the farthest distance from the junction where the
    initial data exceeds 1e-12 in magnitude.  The result is capped at the
    shortest edge and rounded up to a multiple of ``y_step``.
    """
    if y_max is None:
        layout = Layout(config.network, config.grid)
        state0 = initial_state(config, layout)
        radius = 0.0
        for v in state0.per_edge_values:
            nz = np.flatnonzero(np.abs(v) > 1e-12)
            if nz.size:
                radius = max(radius, nz[-1] * layout.dx)
        y_max = default_y_max(config.network, radius)
        y_max = math.ceil(y_max / y_step - 1e-9) * y_step
        y_max = min(y_max, min(e.truncation_length for e in config.network.edges))
    return QuadratureGrid(y_max, y_step, t_step)


def verify_experiment(
    config: ExperimentConfig,
    q: QuadratureGrid,
    t_final: float,
    tol: float = 1e-8,
    max_iters: int = 200,
) -> VerifyResult:
    """Run the oracle and the stepper from the same data and compare at ``t_final``.

    FD samples are linearly interpolated onto the oracle's y-grid (exact when
    ``y_step`` is a multiple of ``dx``).  Picard non-convergence yields a
    result with ``converged=False`` rather than raising.
    """
    network = config.network
    for e in network.edges:
        if q.y_max > e.truncation_length + 1e-12:
            raise ValueError(
                f"oracle y_max={q.y_max} exceeds an edge truncation length {e.truncation_length}"
            )
    grid = GridSpec(config.grid.dx, config.grid.dt, t_final)
    cfg = _with_grid(config, grid)
    layout = Layout(network, grid)
    state0 = initial_state(cfg, layout)
    fd_final = run(network, grid, state0, [], exact=exact_translate(cfg, layout))

    y = q.y
    phi = []
    for v in state0.per_edge_values:
        xi = np.arange(v.size) * grid.dx
        phi.append(np.interp(y, xi, v))
    tail = kernel_tail_bound(network, q.y_max)
    try:
        res = picard_solve(network, phi, t_final, q, tol=tol, max_iters=max_iters)
    except PicardConvergenceError as exc:
        return VerifyResult(
            t_final, math.nan, math.nan, fd_final.junction_value, exc.iterations, exc.residuals, tail, False
        )
    diff = 0.0
    for v_fd, v_pc in zip(fd_final.per_edge_values, res.at_final()):
        xi = np.arange(v_fd.size) * grid.dx
        diff = max(diff, float(np.max(np.abs(np.interp(y, xi, v_fd) - v_pc))))
    return VerifyResult(
        t_final,
        diff,
        float(res.junction[-1]),
        fd_final.junction_value,
        res.iterations,
        res.residuals,
        tail,
        True,
        res,
    )


def _with_grid(config: ExperimentConfig, grid: GridSpec) -> ExperimentConfig:
    return replace(config, grid=grid)
