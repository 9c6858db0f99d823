"""Measurement configuration: bilinear Hamiltonian, bath, pointers, system state.

Phase-space layout used everywhere in the package::

    (X_S, X_1, X_2, P_S, P_1, P_2, q_1 .. q_N, k_1 .. k_N)

Units are dimensionless with hbar = 1.  An infinite mass (``math.inf``)
drops the corresponding kinetic term, which is how the pure Arthurs-Kelly
model is expressed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

# indices into the six system+pointer coordinates
XS, X1, X2, PS, P1, P2 = range(6)
POINTER_COLUMNS = (X1, X2, P1, P2)
FORCE_COLUMNS = (PS, P1, P2)


class ZeroModes(ValueError):
    """A coupled continuous bath was asked for with zero modes."""


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function of time.

    ``values[k]`` holds on ``[breaks[k-1], breaks[k])``; the last value
    holds forever.  Values may be scalars or arrays of a common shape.
    """

    values: tuple
    breaks: tuple = ()

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        brk = tuple(float(b) for b in self.breaks)
        if len(vals) != len(brk) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(b <= 0 or not math.isfinite(b) for b in brk):
            raise ValueError("breakpoints must be positive and finite")
        if any(b2 <= b1 for b1, b2 in zip(brk, brk[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        shapes = {v.shape for v in vals}
        if len(shapes) != 1:
            raise ValueError("all segment values must share one shape")
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ValueError("segment values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "breaks", brk)

    @classmethod
    def constant(cls, value) -> "PiecewiseConstant":
        return cls((value,))

    def __call__(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.breaks, t, side="right"))
        return self.values[k]

    @property
    def is_constant(self) -> bool:
        return all(np.array_equal(v, self.values[0]) for v in self.values[1:])


def _as_piecewise(value) -> PiecewiseConstant:
    if isinstance(value, PiecewiseConstant):
        return value
    return PiecewiseConstant.constant(value)


# ---------------------------------------------------------------- bath

@dataclass(frozen=True)
class OhmicExponential:
    """Ohmic spectral density with exponential cutoff, I(w) = gamma w exp(-w/cutoff)."""

    gamma: float
    cutoff: float

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.cutoff > 0:
            raise ValueError("cutoff frequency must be positive")

    def density(self, omega):
        omega = np.asarray(omega, dtype=float)
        return self.gamma * omega * np.exp(-omega / self.cutoff)

    def integral(self, a: float, b: float) -> float:
        # antiderivative: -gamma * wc * (w + wc) * exp(-w/wc)
        wc = self.cutoff
        F = lambda w: -self.gamma * wc * (w + wc) * math.exp(-w / wc)
        return F(b) - F(a)


@dataclass(frozen=True)
class ContinuousBath:
    """Continuum bath, discretized into ``n_modes`` oscillators on demand.

    All modes share one coupling direction ``pattern`` over (X_S, X_1, X_2),
    so the matrix spectral density is ``I(w) * outer(pattern, pattern)``.
    """

    family: OhmicExponential
    beta: float
    n_modes: int
    switch: PiecewiseConstant = field(default_factory=lambda: PiecewiseConstant.constant(1.0))
    pattern: tuple = (1, 1, 1)

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if int(self.n_modes) != self.n_modes or self.n_modes < 0:
            raise ValueError("mode count must be a non-negative integer")
        pattern = tuple(int(p) for p in self.pattern)
        if len(pattern) != 3 or any(p not in (0, 1) for p in pattern):
            raise ValueError("coupling pattern must be three 0/1 flags")
        object.__setattr__(self, "pattern", pattern)
        object.__setattr__(self, "switch", _as_piecewise(self.switch))
        if self.switch.values[0].shape != ():
            raise ValueError("switch function must be scalar")


@dataclass(frozen=True)
class DiscreteBath:
    """Explicit oscillator bath in its normal-mode basis.

    ``couplings`` is the N x 3 matrix g: row j couples q_j to (X_S, X_1, X_2).
    """

    masses: np.ndarray
    frequencies: np.ndarray
    couplings: np.ndarray
    beta: float
    switch: PiecewiseConstant = field(default_factory=lambda: PiecewiseConstant.constant(1.0))

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        w = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        g = np.asarray(self.couplings, dtype=float).reshape(-1, 3)
        if not (m.shape == w.shape and g.shape[0] == m.shape[0] and m.ndim == 1):
            raise ValueError("masses, frequencies and coupling rows must agree in length")
        if np.any(m <= 0) or np.any(w <= 0):
            raise ValueError("bath masses and frequencies must be strictly positive")
        if not np.all(np.isfinite(g)):
            raise ValueError("bath couplings must be finite")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        for name, arr in (("masses", m), ("frequencies", w), ("couplings", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "switch", _as_piecewise(self.switch))

    @classmethod
    def empty(cls, beta: float = 1.0) -> "DiscreteBath":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, 3)), beta)

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def is_coupled(self) -> bool:
        return self.n_modes > 0 and bool(np.any(self.couplings)) and any(
            np.any(v != 0) for v in self.switch.values)

    def spectral_weights(self) -> np.ndarray:
        """Per-mode 3x3 weights g_j g_j^T / (m_j w_j) of the delta spectral density."""
        g = self.couplings
        return np.einsum("ja,jb->jab", g, g) / (self.masses * self.frequencies)[:, None, None]

    def thermal_variances(self) -> tuple[np.ndarray, np.ndarray]:
        """<q_j^2> and <k_j^2> of the uncoupled thermal state."""
        m, w = self.masses, self.frequencies
        coth = 1.0 / np.tanh(0.5 * self.beta * w)
        return coth / (2 * m * w), m * w * coth / 2


BathSpec = Union[ContinuousBath, DiscreteBath]


def discretize_bath(spec: BathSpec | None) -> DiscreteBath:
    """Turn a bath specification into explicit modes.

    The continuum is cut at 8 cutoff frequencies and split into N equal
    bins; mode j sits at the right bin edge ``j * dw`` with unit mass and a
    coupling chosen so that g_j^2/(m_j w_j) equals the trapezoidal bin
    integral of the spectral density.
    """
    if spec is None:
        return DiscreteBath.empty()
    if isinstance(spec, DiscreteBath):
        return spec
    n = int(spec.n_modes)
    fam = spec.family
    if n == 0:
        if fam.gamma > 0 and any(spec.pattern):
            raise ZeroModes("a coupled continuous bath needs at least one mode")
        return DiscreteBath.empty(spec.beta)
    dw = 8.0 * fam.cutoff / n
    edges = dw * np.arange(n + 1)
    dens = fam.density(edges)
    weights = 0.5 * dw * (dens[:-1] + dens[1:])
    freqs = edges[1:]
    masses = np.ones(n)
    amp = np.sqrt(weights * masses * freqs)
    couplings = amp[:, None] * np.asarray(spec.pattern, dtype=float)[None, :]
    return DiscreteBath(masses, freqs, couplings, spec.beta, spec.switch)


# ---------------------------------------------------------------- model

@dataclass(frozen=True)
class QuadraticModel:
    """System + two pointers with bilinear couplings and an optional bath.

    ``coupling`` is the 2 x 4 matrix C(t) in
    ``(X_S, P_S) C (X_1, X_2, P_1, P_2)^T``; ``potentials`` are the
    strengths C_S, C_1, C_2 of the ``C_k X_k^2`` terms.
    """

    masses: tuple = (math.inf, math.inf, math.inf)
    potentials: tuple = (0.0, 0.0, 0.0)
    coupling: PiecewiseConstant = field(
        default_factory=lambda: PiecewiseConstant.constant(np.zeros((2, 4))))
    bath: BathSpec | None = None

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        if len(masses) != 3 or any(not m > 0 for m in masses):
            raise ValueError("masses must be three positive numbers (inf allowed)")
        pots = tuple(_as_piecewise(c) for c in self.potentials)
        if len(pots) != 3 or any(p.values[0].shape != () for p in pots):
            raise ValueError("potentials must be three scalar time functions")
        coupling = _as_piecewise(self.coupling)
        if coupling.values[0].shape != (2, 4):
            raise ValueError("coupling matrix must be 2 x 4")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "potentials", pots)
        object.__setattr__(self, "coupling", coupling)

    @classmethod
    def arthurs_kelly(cls, kappa: float = 1.0, bath: BathSpec | None = None) -> "QuadraticModel":
        """H_int = kappa (X_S P_1 + P_S P_2) with all masses infinite."""
        c = np.zeros((2, 4))
        c[0, 2] = kappa
        c[1, 3] = kappa
        return cls(coupling=PiecewiseConstant.constant(c), bath=bath)

    def breakpoints(self) -> tuple[float, ...]:
        """All times at which some coupling strength jumps."""
        pts = set(self.coupling.breaks)
        for p in self.potentials:
            pts.update(p.breaks)
        if self.bath is not None:
            pts.update(self.bath.switch.breaks)
        return tuple(sorted(pts))


def symplectic_form(n_modes: int) -> np.ndarray:
    """J for the layout (X_S, X_1, X_2, P_S, P_1, P_2, q.., k..)."""
    def block(n):
        j = np.zeros((2 * n, 2 * n))
        j[:n, n:] = np.eye(n)
        j[n:, :n] = -np.eye(n)
        return j
    d = 6 + 2 * n_modes
    out = np.zeros((d, d))
    out[:6, :6] = block(3)
    out[6:, 6:] = block(n_modes)
    return out


def hamiltonian_matrix(model: QuadraticModel, bath: DiscreteBath, t: float) -> np.ndarray:
    """Symmetric H with Hamiltonian = z^T H z / 2 at time t."""
    n = bath.n_modes
    h = np.zeros((6 + 2 * n, 6 + 2 * n))
    for k, (m, c) in enumerate(zip(model.masses, model.potentials)):
        h[3 + k, 3 + k] = 1.0 / m
        h[k, k] = 2.0 * float(c(t))
    cm = model.coupling(t)
    for i, row in enumerate((XS, PS)):
        for j, col in enumerate(POINTER_COLUMNS):
            h[row, col] += cm[i, j]
            h[col, row] += cm[i, j]
    if n:
        q = 6 + np.arange(n)
        k = 6 + n + np.arange(n)
        h[k, k] = 1.0 / bath.masses
        h[q, q] = bath.masses * bath.frequencies ** 2
        gt = float(bath.switch(t)) * bath.couplings
        h[6:6 + n, :3] = gt
        h[:3, 6:6 + n] = gt.T
    return h


def assemble_generator(model: QuadraticModel, bath: DiscreteBath, t: float) -> np.ndarray:
    """Matrix G with dz/dt = G z for the Heisenberg equations at time t."""
    return symplectic_form(bath.n_modes) @ hamiltonian_matrix(model, bath, t)


# ---------------------------------------------------------------- states

@dataclass(frozen=True)
class PointerPreparation:
    """Squeezed-vacuum pointer states with position variances var1, var2."""

    var1: float
    var2: float

    def __post_init__(self):
        for v in (self.var1, self.var2):
            if not (v > 0 and math.isfinite(v)):
                raise ValueError("pointer variances must be positive and finite")


@dataclass(frozen=True)
class GridDensity:
    """Probability density sampled on a uniform grid."""

    origin: float
    spacing: float
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) < 2:
            raise ValueError("density needs at least two samples")
        if not self.spacing > 0:
            raise ValueError("grid spacing must be positive")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite and non-negative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_samples(cls, x, values, label: str = "") -> "GridDensity":
        x = np.asarray(x, dtype=float)
        h = np.diff(x)
        if len(x) < 2 or np.any(h <= 0) or np.ptp(h) > 1e-9 * max(1.0, np.abs(x).max()):
            raise ValueError("coordinates must form a uniform increasing grid")
        return cls(float(x[0]), float((x[-1] - x[0]) / (len(x) - 1)), values, label)

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.count)

    def mass(self) -> float:
        return float(trapezoid(self.values, dx=self.spacing))

    def mean(self) -> float:
        return float(trapezoid(self.x * self.values, dx=self.spacing) / self.mass())

    def variance(self) -> float:
        mu = self.mean()
        return float(trapezoid((self.x - mu) ** 2 * self.values, dx=self.spacing) / self.mass())

    def normalized(self) -> "GridDensity":
        return GridDensity(self.origin, self.spacing, self.values / self.mass(), self.label)


@dataclass(frozen=True)
class GaussianState:
    """Gaussian system state given by its first and second moments."""

    var_x: float
    var_p: float
    cov_xp: float = 0.0
    mean_x: float = 0.0
    mean_p: float = 0.0

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_p > 0):
            raise ValueError("Gaussian variances must be positive")
        # physical states obey the Robertson-Schroedinger bound
        if self.determinant < 0.25 - 1e-12:
            raise ValueError("covariance violates var_x var_p - cov_xp^2 >= 1/4")

    @classmethod
    def pure(cls, var_x: float, cov_xp: float = 0.0, mean_x: float = 0.0,
             mean_p: float = 0.0) -> "GaussianState":
        return cls(var_x, (0.25 + cov_xp ** 2) / var_x, cov_xp, mean_x, mean_p)

    @property
    def determinant(self) -> float:
        return self.var_x * self.var_p - self.cov_xp ** 2

    @property
    def is_pure(self) -> bool:
        return abs(self.determinant - 0.25) < 1e-12

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_x, self.cov_xp], [self.cov_xp, self.var_p]])


@dataclass(frozen=True)
class TabulatedState:
    """System state known through its position and momentum densities."""

    position: GridDensity
    momentum: GridDensity

    def __post_init__(self):
        for d in (self.position, self.momentum):
            if abs(d.mass() - 1.0) > 1e-8:
                raise ValueError(f"tabulated density not normalized (mass {d.mass():.12g})")


SystemState = Union[GaussianState, TabulatedState]


def wavepacket_superposition(amplitudes, centers, momenta, widths, x_grid, p_grid) -> TabulatedState:
    """Position and momentum densities of a superposition of Gaussian wave packets.

    Packet k is ``exp(i p_k x) <x|sigma_k>`` shifted to ``x_k``; both
    representations are evaluated in closed form and normalized on their grids.
    """
    x = np.asarray(x_grid, dtype=float)
    p = np.asarray(p_grid, dtype=float)
    psi_x = np.zeros(len(x), dtype=complex)
    psi_p = np.zeros(len(p), dtype=complex)
    for c, x0, p0, s in zip(amplitudes, centers, momenta, widths):
        psi_x += c * (2 * np.pi * s**2) ** -0.25 * np.exp(
            -((x - x0) ** 2) / (4 * s**2) + 1j * p0 * x)
        # Fourier transform with (2 pi)^-1/2 exp(-i p x)
        psi_p += c * (2 * s**2 / np.pi) ** 0.25 * np.exp(
            -((p - p0) ** 2) * s**2 - 1j * (p - p0) * x0)
    rho_x = np.abs(psi_x) ** 2
    rho_p = np.abs(psi_p) ** 2
    pos = GridDensity.from_samples(x, rho_x, "x").normalized()
    mom = GridDensity.from_samples(p, rho_p, "p").normalized()
    return TabulatedState(pos, mom)


class MeasurementChoice(enum.Enum):
    """Which observable of each pointer is read out."""

    X1X2 = (X1, X2)
    X1P2 = (X1, P2)
    P1X2 = (P1, X2)
    P1P2 = (P1, P2)

    @property
    def rows(self) -> tuple[int, int]:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "MeasurementChoice":
        key = text.strip().upper().replace(",", "").replace(" ", "")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown measurement choice {text!r}; use one of "
                             f"{', '.join(c.name for c in cls)}") from None
