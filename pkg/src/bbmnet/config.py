"""Experiment configuration: INI-style files with per-edge sections.

Example::

    [network]
    p = 1
    junction = mass

    [edge.0]
    orientation = incoming
    mu = 1.0
    alpha = 1.0
    gamma = 1.0
    nu = 0.0
    length = 100

    [edge.1]
    orientation = outgoing
    mu = 1.1
    ...

    [grid]
    dx = 0.025
    dt = 0.025
    horizon = 40

    [initial]
    kind = solitary
    c = 2
    x0 = 60
    host_edge = 0

    [output]
    stride = 40
    dir = out
    fields = false
    figures = true

    [run]
    bootstrap = auto

``bootstrap = auto`` samples the exact translate for solitary data on
identical inviscid edges and takes one semi-implicit step otherwise.
``x0`` is measured along the line through the incoming edge, which spans
``[0, L0]`` with the junction at ``L0``.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .fd import Bootstrap, GridSpec, Layout, NetworkState
from .network import EdgeSpec, JunctionCondition, NetworkError, Orientation, StarNetwork
from .waves import SolitaryWaveParams, WaveError, solitary_profile, solitary_wave


class ConfigError(ValueError):
    """Bad configuration; the message names the section/key at fault."""


@dataclass(frozen=True)
class SolitaryIC:
    c: float
    x0: float
    host_edge: int = 0


@dataclass(frozen=True)
class ZeroIC:
    pass


@dataclass(frozen=True)
class FileIC:
    path: Path


InitialCondition = SolitaryIC | ZeroIC | FileIC


@dataclass(frozen=True)
class OutputSpec:
    stride: int = 40
    directory: Path = Path("out")
    fields: bool = False
    figures: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    network: StarNetwork
    grid: GridSpec
    initial_condition: InitialCondition
    outputs: OutputSpec = field(default_factory=OutputSpec)
    bootstrap: Bootstrap = Bootstrap.AUTO

    def with_output_dir(self, directory: Path | str) -> "ExperimentConfig":
        return replace(self, outputs=replace(self.outputs, directory=Path(directory)))


def _get(cp: configparser.ConfigParser, section: str, key: str, conv=float, default=None):
    if not cp.has_section(section):
        if default is not None:
            return default
        raise ConfigError(f"missing section [{section}]")
    if not cp.has_option(section, key):
        if default is not None:
            return default
        raise ConfigError(f"[{section}] missing key '{key}'")
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _edge_sections(cp: configparser.ConfigParser) -> list[str]:
    names = [s for s in cp.sections() if s.startswith("edge.")]
    try:
        names.sort(key=lambda s: int(s.split(".", 1)[1]))
    except ValueError:
        bad = [s for s in names if not s.split(".", 1)[1].isdigit()]
        raise ConfigError(f"edge sections must be numbered like [edge.0]; got {bad}") from None
    return names


def apply_overrides(cp: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    """Apply ``section.key=value`` strings (``edge.1.mu=1.5`` works too)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        path, value = item.split("=", 1)
        if "." not in path:
            raise ConfigError(f"--set key must look like section.key, got {path!r}")
        section, key = path.strip().rsplit(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())


def parse_config(
    text: str, base_dir: Path | None = None, overrides: Iterable[str] = ()
) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    apply_overrides(cp, overrides)
    base_dir = base_dir or Path(".")

    edges = []
    for sec in _edge_sections(cp):
        try:
            orient = Orientation(_get(cp, sec, "orientation", str).strip().lower())
        except ValueError:
            raise ConfigError(f"[{sec}] orientation must be 'incoming' or 'outgoing'") from None
        try:
            edges.append(
                EdgeSpec(
                    orientation=orient,
                    mu=_get(cp, sec, "mu"),
                    alpha=_get(cp, sec, "alpha", default=1.0),
                    gamma=_get(cp, sec, "gamma", default=1.0),
                    nu=_get(cp, sec, "nu", default=0.0),
                    truncation_length=_get(cp, sec, "length", default=100.0),
                )
            )
        except NetworkError as exc:
            raise ConfigError(f"[{sec}] {exc}") from None
    try:
        junction = JunctionCondition(_get(cp, "network", "junction", str, default="mass"))
    except ValueError:
        raise ConfigError("[network] junction must be 'mass' or 'kirchhoff'") from None
    p = _get(cp, "network", "p", int, default=1)
    try:
        network = StarNetwork(tuple(edges), p, junction)
    except NetworkError as exc:
        raise ConfigError(f"[network] {exc}") from None

    try:
        grid = GridSpec(
            _get(cp, "grid", "dx"), _get(cp, "grid", "dt"), _get(cp, "grid", "horizon", default=60.0)
        )
        for i, e in enumerate(network.edges):
            grid.nodes(e.truncation_length)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[grid] {exc}") from None

    kind = _get(cp, "initial", "kind", str, default="solitary").strip().lower()
    ic: InitialCondition
    if kind == "solitary":
        ic = SolitaryIC(
            _get(cp, "initial", "c"),
            _get(cp, "initial", "x0"),
            _get(cp, "initial", "host_edge", int, default=0),
        )
        if not 0 <= ic.host_edge < network.n_edges:
            raise ConfigError(f"[initial] host_edge {ic.host_edge} out of range")
        try:
            solitary_wave(ic.c, ic.x0, network.edges[ic.host_edge], network.p)
        except WaveError as exc:
            raise ConfigError(f"[initial] {exc}") from None
    elif kind == "zero":
        ic = ZeroIC()
    elif kind == "file":
        path = Path(_get(cp, "initial", "path", str))
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"[initial] path {path} does not exist")
        ic = FileIC(path)
    else:
        raise ConfigError(f"[initial] kind must be solitary, zero or file; got {kind!r}")

    stride = _get(cp, "output", "stride", int, default=40)
    if stride < 1:
        raise ConfigError("[output] stride must be >= 1")
    outputs = OutputSpec(
        stride=stride,
        directory=Path(_get(cp, "output", "dir", str, default="out")),
        fields=_get(cp, "output", "fields", _bool, default=False),
        figures=_get(cp, "output", "figures", _bool, default=True),
    )
    try:
        bootstrap = Bootstrap(_get(cp, "run", "bootstrap", str, default="auto").strip().lower())
    except ValueError:
        raise ConfigError("[run] bootstrap must be 'auto', 'exact' or 'semi-implicit'") from None
    return ExperimentConfig(network, grid, ic, outputs, bootstrap)


def load_config(path: Path | str, overrides: Iterable[str] = ()) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent, overrides=overrides)


def dump_config(config: ExperimentConfig) -> str:
    """Serialise back to the INI format accepted by :func:`parse_config`."""
    cp = configparser.ConfigParser()
    cp["network"] = {"p": str(config.network.p), "junction": config.network.junction_condition.value}
    for i, e in enumerate(config.network.edges):
        cp[f"edge.{i}"] = {
            "orientation": e.orientation.value,
            "mu": repr(e.mu),
            "alpha": repr(e.alpha),
            "gamma": repr(e.gamma),
            "nu": repr(e.nu),
            "length": repr(e.truncation_length),
        }
    g = config.grid
    cp["grid"] = {"dx": repr(g.dx), "dt": repr(g.dt), "horizon": repr(g.horizon)}
    ic = config.initial_condition
    if isinstance(ic, SolitaryIC):
        cp["initial"] = {"kind": "solitary", "c": repr(ic.c), "x0": repr(ic.x0), "host_edge": str(ic.host_edge)}
    elif isinstance(ic, FileIC):
        cp["initial"] = {"kind": "file", "path": str(ic.path)}
    else:
        cp["initial"] = {"kind": "zero"}
    o = config.outputs
    cp["output"] = {
        "stride": str(o.stride),
        "dir": str(o.directory),
        "fields": str(o.fields).lower(),
        "figures": str(o.figures).lower(),
    }
    cp["run"] = {"bootstrap": config.bootstrap.value}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def wave_params(config: ExperimentConfig) -> SolitaryWaveParams | None:
    ic = config.initial_condition
    if not isinstance(ic, SolitaryIC):
        return None
    return solitary_wave(ic.c, ic.x0, config.network.edges[ic.host_edge], config.network.p)


def _pin(u: np.ndarray, layout: Layout) -> np.ndarray:
    for idx in layout.index:
        u[idx[-1]] = 0.0
    return u


def solitary_state(params: SolitaryWaveParams, layout: Layout, t: float = 0.0) -> NetworkState:
    """Sample a solitary wave along the line through the incoming edge."""
    u = solitary_profile(params, layout.physical_coordinates(), t)
    return NetworkState(_pin(np.asarray(u, dtype=float), layout), layout, t)


def read_sampled_state(path: Path, layout: Layout) -> NetworkState:
    """Read ``edge,y,u`` rows and interpolate each edge onto the grid."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    for col in ("edge", "y", "u"):
        if col not in data.dtype.names:
            raise ConfigError(f"{path}: missing column '{col}' (need edge,y,u)")
    values = []
    for i, idx in enumerate(layout.index):
        rows = data[data["edge"] == i]
        if rows.size == 0:
            raise ConfigError(f"{path}: no samples for edge {i}")
        order = np.argsort(rows["y"])
        y = np.arange(idx.size) * layout.dx
        values.append(np.interp(y, rows["y"][order], rows["u"][order], right=0.0))
    h = values[0][0]
    for i, v in enumerate(values[1:], start=1):
        if abs(v[0] - h) > 1e-9 * max(1.0, abs(h)):
            raise ConfigError(f"{path}: edge {i} junction value {v[0]} differs from {h}")
        v[0] = h
    state = NetworkState.from_edges(values, layout)
    _pin(state.u, layout)
    return state


def initial_state(config: ExperimentConfig, layout: Layout) -> NetworkState:
    ic = config.initial_condition
    if isinstance(ic, SolitaryIC):
        return solitary_state(wave_params(config), layout)
    if isinstance(ic, FileIC):
        return read_sampled_state(ic.path, layout)
    return NetworkState.zeros(layout)
