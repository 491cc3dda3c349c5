"""Closed-form building blocks: solitary waves, half-line Green's function, kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import EdgeSpec

# beyond this |W * xi| the sech power underflows; cosh itself would overflow
_COSH_CUTOFF = 350.0


class WaveError(ValueError):
    pass


@dataclass(frozen=True)
class SolitaryWaveParams:
    """Solitary wave of gBBM on one edge, travelling at speed ``c`` from ``x0``.

    ``W`` is the wavenumber-like inverse width and ``A`` the amplitude
    parameter; the peak height is ``A**(-2/p)``.
    """

    c: float
    x0: float
    W: float
    A: float
    p: int

    @property
    def amplitude(self) -> float:
        return self.A ** (-2.0 / self.p)


def solitary_wave(c: float, x0: float, edge: EdgeSpec, p: int = 1) -> SolitaryWaveParams:
    if not c > edge.alpha:
        raise WaveError(f"speed c={c} must exceed the edge's alpha={edge.alpha}")
    if not edge.gamma > 0:
        raise WaveError("gamma must be positive for a solitary wave to exist")
    W = p / (2.0 * edge.mu) * math.sqrt(1.0 - edge.alpha / c)
    A = p / (2.0 * edge.mu * W) * math.sqrt(2.0 * edge.gamma / (c * (p + 1) * (p + 2)))
    return SolitaryWaveParams(c=c, x0=x0, W=W, A=A, p=p)


def solitary_profile(params: SolitaryWaveParams, x, t=0.0):
    """Evaluate ``[A cosh(W (x - x0 - c t))]**(-2/p)``.

    Works on scalars and arrays.  Points further than ``350 / W`` from the
    peak return exactly 0.
    """
    arg = params.W * (np.asarray(x, dtype=float) - params.x0 - params.c * t)
    far = np.abs(arg) > _COSH_CUTOFF
    safe = np.where(far, 0.0, arg)
    val = (params.A * np.cosh(safe)) ** (-2.0 / params.p)
    out = np.where(far, 0.0, val)
    return float(out) if out.ndim == 0 else out


def solitary_mass(params: SolitaryWaveParams) -> float:
    """Integral of the profile over the whole line (p = 1 only)."""
    if params.p != 1:
        raise NotImplementedError("closed-form mass is only available for p = 1")
    # int sech^2(W s) ds = 2 / W
    return 2.0 * params.amplitude / params.W


@dataclass(frozen=True)
class GreensSpec:
    mu: float

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise WaveError(f"mu must be positive, got {self.mu}")


def greens_G(spec: GreensSpec, x, y):
    """Green's function of ``1 - mu^2 d_xx`` on the half line, zero at x = 0."""
    mu = spec.mu
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = -(np.exp(-(x + y) / mu) - np.exp(-np.abs(x - y) / mu)) / (2.0 * mu)
    return float(out) if out.ndim == 0 else out


def kernel_K(spec: GreensSpec, x, y):
    """``d/dy G(x, y)``; the diagonal uses sgn(0) = 0."""
    mu = spec.mu
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = (np.exp(-(x + y) / mu) + np.sign(x - y) * np.exp(-np.abs(x - y) / mu)) / (
        2.0 * mu**2
    )
    return float(out) if out.ndim == 0 else out
