"""Star networks carrying per-edge gBBMB coefficients.

A star network is a set of semi-infinite edges glued at one junction.  Edge 0
(the first in the list) is the single incoming edge; every other edge is
outgoing.  Each edge is truncated to ``[0, L]`` for computation, measured
from the junction outwards.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

SIGN_TOL = 1e-12


class Orientation(enum.Enum):
    INCOMING = "incoming"
    OUTGOING = "outgoing"

    @property
    def sign(self) -> int:
        return -1 if self is Orientation.INCOMING else 1


class JunctionCondition(enum.Enum):
    MASS_CONSERVATION = "mass"
    KIRCHHOFF = "kirchhoff"


class GWPClass(enum.Enum):
    """Outcome of the energy-based global well-posedness test."""

    ENERGY_NONINCREASING_EVEN_P = "energy_nonincreasing_even_p"
    ENERGY_NONINCREASING_ANY_P = "energy_nonincreasing_any_p"
    INCONCLUSIVE = "inconclusive"


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeSpec:
    orientation: Orientation
    mu: float
    alpha: float = 1.0
    gamma: float = 1.0
    nu: float = 0.0
    truncation_length: float = 100.0

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise NetworkError(f"mu must be positive, got {self.mu}")
        if not self.alpha >= 0:
            raise NetworkError(f"alpha must be nonnegative, got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise NetworkError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not self.nu >= 0:
            raise NetworkError(f"nu must be nonnegative, got {self.nu}")
        if not self.truncation_length > 0:
            raise NetworkError(
                f"truncation_length must be positive, got {self.truncation_length}"
            )

    @property
    def sigma(self) -> int:
        return self.orientation.sign


@dataclass(frozen=True)
class StarNetwork:
    edges: tuple[EdgeSpec, ...]
    p: int = 1
    junction_condition: JunctionCondition = JunctionCondition.MASS_CONSERVATION

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(self.edges) < 2:
            raise NetworkError(f"a star network needs at least 2 edges, got {len(self.edges)}")
        if isinstance(self.p, bool) or int(self.p) != self.p or self.p < 1:
            raise NetworkError(f"p must be a positive integer, got {self.p}")
        object.__setattr__(self, "p", int(self.p))
        incoming = [i for i, e in enumerate(self.edges) if e.orientation is Orientation.INCOMING]
        if incoming != [0]:
            raise NetworkError(
                "exactly one incoming edge is allowed and it must come first; "
                f"incoming edge indices: {incoming}"
            )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([e.sigma for e in self.edges], dtype=float)

    def coefficient(self, name: str) -> np.ndarray:
        return np.array([getattr(e, name) for e in self.edges], dtype=float)


def build_network(
    edges: Sequence[EdgeSpec],
    p: int = 1,
    junction_condition: JunctionCondition | str = JunctionCondition.MASS_CONSERVATION,
) -> StarNetwork:
    """Validate and assemble a :class:`StarNetwork`.

    Raises:
        NetworkError: on an empty or single edge list, a misplaced or repeated
            incoming edge, ``p < 1``, or any out-of-range edge coefficient.
    """
    if not edges:
        raise NetworkError("edge list is empty")
    return StarNetwork(tuple(edges), p, JunctionCondition(junction_condition))


def two_edge_network(
    mu: Sequence[float],
    alpha: Sequence[float] = (1.0, 1.0),
    gamma: Sequence[float] = (1.0, 1.0),
    nu: Sequence[float] = (0.0, 0.0),
    length: float = 100.0,
    p: int = 1,
    junction_condition: JunctionCondition | str = JunctionCondition.MASS_CONSERVATION,
) -> StarNetwork:
    """Shorthand for the incoming/outgoing pair used in the scattering runs."""
    orient = (Orientation.INCOMING, Orientation.OUTGOING)
    edges = [
        EdgeSpec(o, mu=m, alpha=a, gamma=g, nu=n, truncation_length=length)
        for o, m, a, g, n in zip(orient, mu, alpha, gamma, nu)
    ]
    return build_network(edges, p, junction_condition)


def advective_flux(network: StarNetwork, edge_index: int, u):
    """f_i(u) = alpha_i u + gamma_i u^(p+1) / (p+1); accepts scalars or arrays."""
    edge = network.edges[edge_index]
    p = network.p
    return edge.alpha * u + edge.gamma * u ** (p + 1) / (p + 1)


def advective_speed(network: StarNetwork, edge_index: int, u):
    """Derivative of the flux, alpha_i + gamma_i u^p."""
    edge = network.edges[edge_index]
    return edge.alpha + edge.gamma * u**network.p


def gwp_classification(network: StarNetwork) -> GWPClass:
    sig = network.sigmas
    sa = float(np.dot(sig, network.coefficient("alpha")))
    sg = float(np.dot(sig, network.coefficient("gamma")))
    if abs(sa) <= SIGN_TOL and abs(sg) <= SIGN_TOL:
        return GWPClass.ENERGY_NONINCREASING_ANY_P
    if network.p % 2 == 0 and sa >= -SIGN_TOL and sg >= -SIGN_TOL:
        return GWPClass.ENERGY_NONINCREASING_EVEN_P
    return GWPClass.INCONCLUSIVE
