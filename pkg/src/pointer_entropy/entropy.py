"""Differential entropies, the collective entropy and its lower bounds (nats)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .distributions import Density, GaussianDensity
from .model import GaussianState, SystemState, TabulatedState
from .noise import NoiseCovariance

NORM_TOL = 1e-6
SATURATION_TOL = 1e-6
HIRSCHMAN_BOUND = 1.0 + math.log(math.pi)


class NotNormalized(ValueError):
    pass


class LambdaOutOfRange(ValueError):
    pass


def differential_entropy(density: Density) -> float:
    """-int p ln p; closed form for Gaussians, trapezoidal quadrature on grids."""
    if isinstance(density, GaussianDensity):
        return 0.5 * math.log(2 * math.pi * math.e * density.variance)
    mass = density.mass()
    if abs(mass - 1.0) > NORM_TOL:
        raise NotNormalized(f"density integrates to {mass:.10g}")
    p = density.values
    plogp = np.zeros_like(p)
    live = p >= 1e-300
    plogp[live] = p[live] * np.log(p[live])
    return float(-trapezoid(plogp, dx=density.spacing))


def collective_bound(cov: NoiseCovariance) -> float:
    """1 + ln[2 pi (dX dP + 1/2)]."""
    return 1.0 + math.log(2 * math.pi * (cov.product + 0.5))


def optimal_weight(cov: NoiseCovariance) -> float:
    return 1.0 / (1.0 + 2.0 * cov.product)


def single_weight_bound(lam: float, product: float) -> float:
    """Bound on S for one weighting lambda in (0, 1) and noise product dX dP."""
    return (1.0 - lam * math.log(lam / math.pi)
            + (1.0 - lam) * math.log(2 * math.pi * product / (1.0 - lam)))


@dataclass(frozen=True)
class EntropyReport:
    s_x: float
    s_p: float
    bound: float
    lam: float

    @property
    def total(self) -> float:
        return self.s_x + self.s_p

    @property
    def gap(self) -> float:
        return self.total - self.bound

    @property
    def saturated(self) -> bool:
        return self.gap < SATURATION_TOL


def collective_entropy(marginal_x: Density, marginal_p: Density, cov: NoiseCovariance) -> EntropyReport:
    return EntropyReport(differential_entropy(marginal_x), differential_entropy(marginal_p),
                         collective_bound(cov), optimal_weight(cov))


def lieb_bound(s_f: float, s_g: float, lam: float) -> float:
    """Lower bound on S[f * g] for weighting lam in [0, 1]."""
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRange(f"lambda = {lam} outside [0, 1]")
    xlogx = lambda v: v * math.log(v) if v > 0 else 0.0
    return lam * s_f + (1 - lam) * s_g - 0.5 * (xlogx(lam) + xlogx(1 - lam))


@dataclass(frozen=True)
class HirschmanReport:
    total: float
    bound: float
    ok: bool


def hirschman_check(state: SystemState) -> HirschmanReport:
    """Check S_x + S_p >= 1 + ln(pi) for the system's own densities."""
    if isinstance(state, GaussianState):
        sx = differential_entropy(GaussianDensity(state.mean_x, state.var_x))
        sp = differential_entropy(GaussianDensity(state.mean_p, state.var_p))
    elif isinstance(state, TabulatedState):
        sx = differential_entropy(state.position)
        sp = differential_entropy(state.momentum)
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    total = sx + sp
    return HirschmanReport(total, HIRSCHMAN_BOUND, total >= HIRSCHMAN_BOUND - 1e-6)


def minimal_entropy_state(cov: NoiseCovariance) -> GaussianState:
    """Pure Gaussian with var_x = dX / (2 dP), which saturates the collective bound."""
    var_x = math.sqrt(cov.delta_x2) / (2 * math.sqrt(cov.delta_p2))
    return GaussianState(var_x, 0.25 / var_x)

