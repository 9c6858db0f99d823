"""Broadened marginal distributions and Gaussian joint distributions.

Pointers and bath act as a Gaussian filter: each marginal of the inferred
observables is the corresponding system density convolved with a centred
Gaussian whose variance is the noise term on that axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .model import GaussianState, GridDensity, SystemState, TabulatedState
from .noise import NoiseCovariance

GRID_POINTS = 4096
GRID_SPAN = 8.0
LEAK_TOL = 1e-6
MAX_REFINE = 64


class GridTooSmall(ValueError):
    """The output grid loses more than 1e-6 of probability."""


class NonGaussianState(TypeError):
    """The joint distribution is only available for Gaussian system states."""


@dataclass(frozen=True)
class GaussianDensity:
    """Normal density N(mean, variance) on one axis."""

    mean: float
    variance: float
    label: str = ""

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-(x - self.mean) ** 2 / (2 * self.variance)) / math.sqrt(
            2 * math.pi * self.variance)

    def on_grid(self, points: int = GRID_POINTS, span: float = GRID_SPAN) -> GridDensity:
        sd = math.sqrt(self.variance)
        x = np.linspace(self.mean - span * sd, self.mean + span * sd, points)
        return GridDensity.from_samples(x, self.pdf(x), self.label)


Density = GaussianDensity | GridDensity


def general_gaussian(a, b, c, n, x, p):
    """n exp(a x^2 + b p^2 + c x p)."""
    return n * np.exp(a * x ** 2 + b * p ** 2 + c * x * p)


@dataclass(frozen=True)
class GaussianFilterCoefficients:
    """Exponent coefficients of the pointer and bath Gaussian filters.

    The pointer (bath) filter is ``G(a/d, b/d, c/d, 1/(2 pi sqrt d))`` with
    ``[[-2b, c], [c, -2a]]`` its covariance and ``d = 4ab - c^2``.  A switched
    off bath has all bath coefficients zero (delta filter).
    """

    a_p: float
    b_p: float
    c_p: float
    a_b: float
    b_b: float
    c_b: float

    @classmethod
    def from_matrices(cls, pointer: np.ndarray, bath: np.ndarray) -> "GaussianFilterCoefficients":
        return cls(-0.5 * pointer[1, 1], -0.5 * pointer[0, 0], pointer[0, 1],
                   -0.5 * bath[1, 1], -0.5 * bath[0, 0], bath[0, 1])

    @property
    def d_p(self) -> float:
        return 4 * self.a_p * self.b_p - self.c_p ** 2

    @property
    def d_b(self) -> float:
        return 4 * self.a_b * self.b_b - self.c_b ** 2

    @property
    def a(self) -> float:
        return self.a_p + self.a_b

    @property
    def b(self) -> float:
        return self.b_p + self.b_b

    @property
    def c(self) -> float:
        return self.c_p + self.c_b

    @property
    def d(self) -> float:
        return 4 * self.a * self.b - self.c ** 2

    @property
    def Delta_x2(self) -> float:
        return -self.d / (2 * self.a)

    @property
    def Delta_p2(self) -> float:
        return -self.d / (2 * self.b)

    @property
    def gamma(self) -> float:
        return self.c / self.d

    def noise_terms(self) -> tuple[float, float, float]:
        """(delta_X^2, delta_P^2, delta_XP) of the combined filter."""
        return -2 * self.b, -2 * self.a, self.c

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointer and bath noise covariance matrices."""
        pm = np.array([[-2 * self.b_p, self.c_p], [self.c_p, -2 * self.a_p]])
        bm = np.array([[-2 * self.b_b, self.c_b], [self.c_b, -2 * self.a_b]])
        return pm, bm

    def filter_density(self, x, p):
        """Combined Gaussian filter evaluated at (x, p)."""
        return general_gaussian(-1 / (2 * self.Delta_x2), -1 / (2 * self.Delta_p2), self.gamma,
                                1 / (2 * math.pi * math.sqrt(self.d)), x, p)


def filter_coefficients(cov: NoiseCovariance) -> GaussianFilterCoefficients:
    """Filter coefficients from the pointer (B V B^T) and bath parts of the noise."""
    return GaussianFilterCoefficients.from_matrices(cov.pointer, cov.bath)


def _default_grid(src: GridDensity, delta2: float, points: int) -> np.ndarray:
    # mean +- 8 broadened sd, widened to the source support +- 8 delta
    mean, sd, delta = src.mean(), math.sqrt(src.variance() + delta2), math.sqrt(delta2)
    lo = min(mean - GRID_SPAN * sd, src.x[0] - GRID_SPAN * delta)
    hi = max(mean + GRID_SPAN * sd, src.x[-1] + GRID_SPAN * delta)
    return np.linspace(lo, hi, points)


def _refine(src: GridDensity, factor: int) -> GridDensity:
    # linear interpolation keeps the trapezoidal mass and mean exactly
    x = src.x
    fine = np.linspace(x[0], x[-1], factor * (len(x) - 1) + 1)
    return GridDensity.from_samples(fine, np.interp(fine, x, src.values), src.label)


def _subgrid_plan(h: float, delta2: float) -> tuple[int, float] | None:
    """Refinement factor k and reduced kernel variance for a kernel narrower than h.

    Interpolating onto a k-times finer grid adds h^2 (1 - 1/k^2) / 6 of
    variance, which is taken back out of the kernel.  None when the kernel is
    too narrow for that to leave a resolvable remainder.
    """
    for k in range(2, MAX_REFINE + 1):
        rest = delta2 - h * h * (1 - 1 / k**2) / 6
        if rest >= (h / k) ** 2:
            return k, rest
    return None


def convolve_gaussian(src: GridDensity, delta2: float, grid) -> np.ndarray:
    """Trapezoidal evaluation of (src * N(0, delta2)) at the points ``grid``.

    Kernels narrower than the input spacing act on a linearly refined copy of
    the input with the interpolation variance compensated; below about
    h / sqrt(6) the noise is unresolvable and the interpolated input is returned.
    """
    grid = np.asarray(grid, dtype=float)
    if delta2 < src.spacing ** 2:
        plan = _subgrid_plan(src.spacing, delta2)
        if plan is None:
            return np.interp(grid, src.x, src.values, left=0.0, right=0.0)
        src = _refine(src, plan[0])
        delta2 = plan[1]
    w = np.full(src.count, src.spacing)
    w[[0, -1]] *= 0.5
    mask = src.values > 0
    xs, ws = src.x[mask], (w * src.values)[mask]
    out = np.empty(len(grid))
    norm = 1.0 / math.sqrt(2 * math.pi * delta2)
    for start in range(0, len(grid), 512):
        g = grid[start:start + 512]
        out[start:start + 512] = norm * np.exp(-(g[:, None] - xs[None, :]) ** 2 / (2 * delta2)) @ ws
    return out


def broadened_marginal(state: SystemState, delta2: float, axis: str, grid=None,
                       points: int = GRID_POINTS) -> Density:
    """Marginal of the inferred observable on ``axis`` ('position' or 'momentum').

    Gaussian states give a closed-form GaussianDensity (variances add).
    Tabulated states are convolved by direct summation onto ``grid``, by
    default ``points`` samples across mean +- 8 broadened standard deviations
    (widened if needed to cover the input support +- 8 noise deviations).
    """
    if axis not in ("position", "momentum"):
        raise ValueError("axis must be 'position' or 'momentum'")
    if not delta2 >= 0:
        raise ValueError("noise variance must be non-negative")
    label = "X" if axis == "position" else "P"
    if isinstance(state, GaussianState):
        mean, var = ((state.mean_x, state.var_x) if axis == "position"
                     else (state.mean_p, state.var_p))
        return GaussianDensity(mean, var + delta2, label)
    if not isinstance(state, TabulatedState):
        raise TypeError(f"unsupported state type {type(state).__name__}")
    src = state.position if axis == "position" else state.momentum
    if delta2 == 0 and grid is None:
        return src
    if grid is None:
        grid = _default_grid(src, delta2, points)
    if delta2 == 0:
        values = np.interp(grid, src.x, src.values, left=0.0, right=0.0)
    else:
        values = convolve_gaussian(src, delta2, grid)
    out = GridDensity.from_samples(grid, values, label)
    leak = abs(out.mass() - src.mass())
    if leak > LEAK_TOL:
        raise GridTooSmall(f"{axis} marginal loses {leak:.3g} probability outside the grid")
    return out


@dataclass(frozen=True)
class JointGaussian:
    """Joint distribution of (inferred position, inferred momentum)."""

    mean: np.ndarray
    covariance: np.ndarray

    def marginal(self, axis: str) -> GaussianDensity:
        k = 0 if axis == "position" else 1
        return GaussianDensity(float(self.mean[k]), float(self.covariance[k, k]), "XP"[k])

    def pdf(self, x, p):
        inv = np.linalg.inv(self.covariance)
        dx, dp = np.asarray(x) - self.mean[0], np.asarray(p) - self.mean[1]
        q = inv[0, 0] * dx ** 2 + 2 * inv[0, 1] * dx * dp + inv[1, 1] * dp ** 2
        return np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(np.linalg.det(self.covariance)))


def joint_distribution(state: SystemState, fc: GaussianFilterCoefficients) -> JointGaussian:
    """Wigner function of a Gaussian state convolved with the combined filter."""
    if not isinstance(state, GaussianState):
        raise NonGaussianState("joint distribution needs a Gaussian system state")
    dx2, dp2, dxp = fc.noise_terms()
    noise = np.array([[dx2, dxp], [dxp, dp2]])
    return JointGaussian(np.array([state.mean_x, state.mean_p]), state.covariance + noise)


def read_density(path, label: str = "") -> GridDensity:
    """Two-column text (coordinate, density) on a uniform grid."""
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns")
    return GridDensity.from_samples(data[:, 0], data[:, 1], label)


def write_density(path, density: GridDensity) -> None:
    np.savetxt(Path(path), np.column_stack([density.x, density.values]), fmt="%.17g")


def gaussian_wigner(state: GaussianState, x, p):
    """Wigner function of a Gaussian state."""
    return JointGaussian(np.array([state.mean_x, state.mean_p]), state.covariance).pdf(x, p)


def trapezoid_2d(values, dx: float, dp: float) -> float:
    return float(trapezoid(trapezoid(values, dx=dp, axis=1), dx=dx))
