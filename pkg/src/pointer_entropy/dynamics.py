"""Linear Heisenberg dynamics and the inferred-observable coefficients.

The full phase-space flow is exact for piecewise-constant couplings: each
grid interval is advanced by one matrix exponential of the (constant)
generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import expm

from .model import (FORCE_COLUMNS, POINTER_COLUMNS, PS, XS, DiscreteBath,
                    MeasurementChoice, QuadraticModel, assemble_generator,
                    discretize_bath, symplectic_form)

COND_LIMIT = 1e8
GRID_RTOL = 1e-12


class SegmentMismatch(ValueError):
    """A grid interval straddles a coupling discontinuity."""


class NotInvertible(ArithmeticError):
    """The measured pointer observables do not determine (X_S, P_S)."""

    def __init__(self, message: str, cond: float = math.inf):
        super().__init__(message)
        self.cond = cond


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1 or grid[0] != 0.0:
        raise ValueError("time grid must be one-dimensional and start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return grid


def build_time_grid(times, max_step: float, breakpoints=()) -> np.ndarray:
    """Grid through 0, ``times`` and ``breakpoints`` with steps <= max_step.

    Each gap between required points is split into equal sub-steps, so the
    grid is uniform wherever the required points are evenly spaced.
    """
    t_end = max(times)
    req = sorted({0.0, *map(float, times), *(b for b in breakpoints if b < t_end)})
    pts = [0.0]
    for a, b in zip(req, req[1:]):
        if b - a <= GRID_RTOL * max(1.0, b):
            continue
        n = max(1, math.ceil((b - a) / max_step - 1e-9))
        pts.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(pts)


class Propagator:
    """Phase-space maps Phi(t_i, t_j) on a fixed time grid.

    Stores the one-step maps and the cumulative maps Phi(t_i, 0); maps
    between arbitrary grid times are formed by multiplying step maps.
    """

    def __init__(self, model: QuadraticModel, bath: DiscreteBath, grid,
                 steps: np.ndarray, cumulative: np.ndarray):
        self.model = model
        self.bath = bath
        self.grid = grid
        self.steps = steps
        self.cumulative = cumulative

    @property
    def dim(self) -> int:
        return self.cumulative.shape[-1]

    @cached_property
    def J(self) -> np.ndarray:
        return symplectic_form(self.bath.n_modes)

    @cached_property
    def symplectic_defects(self) -> np.ndarray:
        """max |Phi^T J Phi - J| for every cumulative map Phi(t_i, 0)."""
        J = self.J
        return np.array([np.abs(p.T @ J @ p - J).max() for p in self.cumulative])

    def index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[i] - t) > GRID_RTOL * max(1.0, abs(t)) + 1e-14:
            raise ValueError(f"t = {t!r} is not on the propagator grid")
        return i

    def phi(self, t: float, s: float = 0.0) -> np.ndarray:
        """Phi(t, s) for grid times s <= t."""
        i, j = self.index(t), self.index(s)
        if j > i:
            raise ValueError("need s <= t")
        if j == 0:
            return self.cumulative[i].copy()
        out = np.eye(self.dim)
        for k in range(j, i):
            out = self.steps[k] @ out
        return out

    def pull_back(self, rows: np.ndarray, t: float) -> np.ndarray:
        """``rows @ Phi(t, t_j)`` for every grid time t_j <= t (shape (j, *rows.shape))."""
        i = self.index(t)
        out = np.empty((i + 1,) + rows.shape)
        out[i] = rows
        for k in range(i - 1, -1, -1):
            out[k] = out[k + 1] @ self.steps[k]
        return out

    @cached_property
    def refined(self) -> "Propagator":
        """Same dynamics on the grid with every step halved."""
        g = self.grid
        fine = np.empty(2 * len(g) - 1)
        fine[0::2] = g
        fine[1::2] = 0.5 * (g[:-1] + g[1:])
        return propagate(self.model, self.bath, fine)


def propagate(model: QuadraticModel, bath: DiscreteBath | None = None, grid=(0.0,)) -> Propagator:
    """Exact flow of the Heisenberg equations on ``grid``.

    ``bath`` defaults to the discretized bath of the model.
    """
    grid = _check_grid(grid)
    if bath is None:
        bath = discretize_bath(model.bath)
    for b in model.breakpoints():
        inside = (grid[:-1] < b) & (grid[1:] > b)
        near = np.abs(grid - b) <= GRID_RTOL * max(1.0, b)
        if inside.any() and not near.any():
            raise SegmentMismatch(f"coupling discontinuity at t = {b} is not a grid point")
    d = 6 + 2 * bath.n_modes
    steps = np.empty((len(grid) - 1, d, d))
    cumulative = np.empty((len(grid), d, d))
    cumulative[0] = np.eye(d)
    cache: dict = {}
    for k, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        gen = assemble_generator(model, bath, 0.5 * (a + b))
        key = (b - a, gen.tobytes())
        if key not in cache:
            cache[key] = expm(gen * (b - a))
        steps[k] = cache[key]
        cumulative[k + 1] = steps[k] @ cumulative[k]
    return Propagator(model, bath, grid, steps, cumulative)


@dataclass(frozen=True)
class InferenceCoefficients:
    """A(t), B(t) and the full inferred map at one time.

    ``rows`` is the 2 x d matrix A W Phi(t, 0) giving the inferred
    observables as linear combinations of initial phase-space coordinates.
    """

    t: float
    choice: MeasurementChoice
    A: np.ndarray
    B: np.ndarray
    rows: np.ndarray
    cond: float
    exists: bool = True

    @property
    def bath_columns(self) -> np.ndarray:
        return self.rows[:, 6:]

    def retrodiction_defect(self) -> float:
        return float(np.abs(self.rows[:, [XS, PS]] - np.eye(2)).max())


def inference_coefficients(prop: Propagator, choice: MeasurementChoice, t: float,
                           strict: bool = True) -> InferenceCoefficients:
    """Coefficients mapping the measured pointer observables to (X, P) inferences.

    Raises NotInvertible when the 2x2 system block is singular or its
    condition number exceeds 1e8; with ``strict=False`` a record with
    ``exists=False`` and NaN matrices is returned instead.
    """
    measured = prop.phi(t)[list(choice.rows)]
    block = measured[:, [XS, PS]]
    cond = float(np.linalg.cond(block))
    if not cond <= COND_LIMIT:
        if strict:
            raise NotInvertible(f"inference impossible at t = {t} with {choice.name} "
                                f"(condition number {cond:.3g})", cond)
        nan = np.full((2, 2), np.nan)
        return InferenceCoefficients(t, choice, nan, np.full((2, 4), np.nan),
                                     np.full((2, prop.dim), np.nan), cond, False)
    A = np.linalg.inv(block)
    rows = A @ measured
    B = rows[:, list(POINTER_COLUMNS)]
    return InferenceCoefficients(t, choice, A, B, rows, cond)


def _require(coeff: InferenceCoefficients):
    if not coeff.exists:
        raise NotInvertible(f"no inference coefficients at t = {coeff.t}", coeff.cond)


def lambda_kernel_samples(prop: Propagator, coeff: InferenceCoefficients) -> np.ndarray:
    """Lambda(t, s) for every grid time s <= t, shape (n_s, 2, 3).

    Lambda(t, s) = A(t) W Phi_sp(t, s) E, where Phi_sp is the system+pointer
    block of the full flow (bath started at rest at time s) and E injects a
    force 3-vector into the momenta (P_S, P_1, P_2).
    """
    _require(coeff)
    sel = np.zeros((2, prop.dim))
    sel[[0, 1], list(coeff.choice.rows)] = 1.0
    pulled = prop.pull_back(coeff.A @ sel, coeff.t)
    return pulled[:, :, list(FORCE_COLUMNS)]


def lambda_kernel(prop: Propagator, coeff: InferenceCoefficients, t: float, s: float) -> np.ndarray:
    """Lambda(t, s) as a 2 x 3 matrix."""
    _require(coeff)
    if prop.index(t) != prop.index(coeff.t):
        raise ValueError("coefficients belong to a different time")
    return lambda_kernel_samples(prop, coeff)[prop.index(s)]


def trapezoid_weights(grid: np.ndarray, switch=None) -> np.ndarray:
    """Trapezoid weights on a (possibly non-uniform) grid, times g(t) per interval.

    The switch value of each interval multiplies both of its end weights, so
    jumps of g(t) at grid points are integrated exactly.
    """
    h = np.diff(grid)
    if switch is not None:
        h = h * np.array([float(switch(0.5 * (a + b))) for a, b in zip(grid[:-1], grid[1:])])
    w = np.zeros(len(grid))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def shift(prop: Propagator, coeff: InferenceCoefficients, pointer_means,
          bath_force_mean=None) -> np.ndarray:
    """Expectation shift s(t) = B <J> + int_0^t Lambda(t, s) <xi(s)> ds.

    ``bath_force_mean`` maps a time to the mean stochastic force 3-vector
    (switch function included); ``None`` means a thermal bath, zero mean.
    """
    _require(coeff)
    out = coeff.B @ np.asarray(pointer_means, dtype=float)
    if bath_force_mean is not None:
        i = prop.index(coeff.t)
        times = prop.grid[:i + 1]
        lam = lambda_kernel_samples(prop, coeff)
        force = np.array([np.asarray(bath_force_mean(s), dtype=float) for s in times])
        if i > 0:
            out = out + trapezoid(np.einsum("kab,kb->ka", lam, force), times, axis=0)
    return out
