"""Noise-operator covariance of the inferred observables.

Two independent evaluations are provided:

* ``direct``: push the exact initial covariance of pointers and thermal bath
  modes through the inferred map ``A W Phi(t, 0)``.
* ``kernel``: pointer part ``B V B^T`` plus the double time integral of the
  response kernel Lambda against the bath noise kernel nu, by the product
  trapezoidal rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (InferenceCoefficients, NotInvertible, Propagator,
                       inference_coefficients, lambda_kernel_samples,
                       trapezoid_weights)
from .model import DiscreteBath, PointerPreparation

BOUND_TOL = 1e-9
CONVERGENCE_RTOL = 1e-4
_CHUNK = 64


class GridTooCoarse(ArithmeticError):
    """Step halving moved the kernel-route result by more than the tolerance."""


class InconsistentInput(ValueError):
    """A covariance matrix that is not positive semidefinite."""


@dataclass(frozen=True)
class NoiseCovariance:
    """Noise covariance [[dX^2, dXP], [dXP, dP^2]] split into pointer and bath parts."""

    pointer: np.ndarray
    bath: np.ndarray
    route: str

    @classmethod
    def from_terms(cls, delta_x2: float, delta_p2: float, delta_xp: float = 0.0) -> "NoiseCovariance":
        m = np.array([[delta_x2, delta_xp], [delta_xp, delta_p2]], dtype=float)
        return cls(m, np.zeros((2, 2)), "given")

    @property
    def total(self) -> np.ndarray:
        return self.pointer + self.bath

    @property
    def delta_x2(self) -> float:
        return float(self.total[0, 0])

    @property
    def delta_p2(self) -> float:
        return float(self.total[1, 1])

    @property
    def delta_xp(self) -> float:
        return float(self.total[0, 1])

    @property
    def product(self) -> float:
        """delta_X * delta_P."""
        return float(np.sqrt(self.delta_x2 * self.delta_p2))


@dataclass(frozen=True)
class NoiseKernel:
    """Symmetrized bath force correlation nu(tau), sampled at ``taus``.

    ``values`` has shape ``taus.shape + (3, 3)``.
    """

    beta: float
    taus: np.ndarray
    values: np.ndarray
    frequencies: np.ndarray
    weights: np.ndarray


def pointer_covariance(prep: PointerPreparation) -> np.ndarray:
    """Symmetrized covariance of (X_1, X_2, P_1, P_2) for squeezed vacuum pointers."""
    return np.diag([prep.var1, prep.var2, 0.25 / prep.var1, 0.25 / prep.var2])


def noise_kernel(bath: DiscreteBath, beta: float | None = None, taus=0.0) -> NoiseKernel:
    """nu(tau) = 1/2 sum_j coth(beta w_j / 2) cos(w_j tau) g_j g_j^T / (m_j w_j)."""
    beta = bath.beta if beta is None else float(beta)
    if not beta > 0:
        raise ValueError("beta must be positive")
    taus = np.asarray(taus, dtype=float)
    w = bath.frequencies
    weights = bath.spectral_weights()
    if bath.n_modes == 0:
        return NoiseKernel(beta, taus, np.zeros(taus.shape + (3, 3)), w, weights)
    amp = 0.5 / np.tanh(0.5 * beta * w)
    phase = np.cos(taus[..., None] * w)
    values = np.einsum("...j,j,jab->...ab", phase, amp, weights)
    return NoiseKernel(beta, taus, values, w, weights)


def _direct(coeff: InferenceCoefficients, bath: DiscreteBath, beta: float) -> np.ndarray:
    n = bath.n_modes
    if n == 0:
        return np.zeros((2, 2))
    if beta != bath.beta:
        bath = DiscreteBath(bath.masses, bath.frequencies, bath.couplings, beta, bath.switch)
    vq, vk = bath.thermal_variances()
    mb = coeff.bath_columns
    return (mb * np.concatenate([vq, vk])) @ mb.T


def _kernel(prop: Propagator, coeff: InferenceCoefficients, beta: float) -> np.ndarray:
    bath = prop.bath
    if not bath.is_coupled:
        return np.zeros((2, 2))
    i = prop.index(coeff.t)
    if i == 0:
        return np.zeros((2, 2))
    times = prop.grid[:i + 1]
    lam = lambda_kernel_samples(prop, coeff)
    f = trapezoid_weights(times, bath.switch)[:, None, None] * lam
    out = np.zeros((2, 2))
    # fixed summation order: chunks of the first time index, ascending
    for start in range(0, len(times), _CHUNK):
        sl = slice(start, start + _CHUNK)
        nu = noise_kernel(bath, beta, times[sl, None] - times[None, :]).values
        t_i = np.einsum("ikbc,kdc->ibd", nu, f)
        out += np.einsum("iab,ibd->ad", f[sl], t_i)
    return 0.5 * (out + out.T)


def noise_covariance(prop: Propagator, coeff: InferenceCoefficients, prep: PointerPreparation,
                     route: str = "direct", beta: float | None = None,
                     check: bool = True) -> NoiseCovariance:
    """Noise covariance at ``coeff.t`` by the ``direct`` or ``kernel`` route.

    For the kernel route with ``check`` the computation is repeated with the
    time step halved; a relative change above 1e-4 raises GridTooCoarse.
    """
    if not coeff.exists:
        raise NotInvertible(f"no inference coefficients at t = {coeff.t}", coeff.cond)
    beta = prop.bath.beta if beta is None else float(beta)
    pointer = coeff.B @ pointer_covariance(prep) @ coeff.B.T
    pointer = 0.5 * (pointer + pointer.T)
    if route == "direct":
        return NoiseCovariance(pointer, _direct(coeff, prop.bath, beta), "direct")
    if route != "kernel":
        raise ValueError(f"unknown route {route!r}")
    result = NoiseCovariance(pointer, _kernel(prop, coeff, beta), "kernel")
    if check and prop.bath.is_coupled:
        fine_prop = prop.refined
        fine_coeff = inference_coefficients(fine_prop, coeff.choice, coeff.t)
        fine = NoiseCovariance(pointer, _kernel(fine_prop, fine_coeff, beta), "kernel")
        change = route_disagreement(result, fine)
        if change > CONVERGENCE_RTOL:
            raise GridTooCoarse(f"kernel route moved by {change:.3g} under step halving "
                                f"at t = {coeff.t}")
    return result


def route_disagreement(a: NoiseCovariance, b: NoiseCovariance) -> float:
    """Largest element-wise relative difference of two covariance matrices.

    Element (i, j) is scaled by sqrt(a_ii a_jj): plain relative error on the
    diagonal, correlation-normalized off the diagonal.
    """
    ta, tb = a.total, b.total
    scale = np.sqrt(np.outer(np.diag(ta), np.diag(ta)))
    return float(np.max(np.abs(ta - tb) / scale))


@dataclass(frozen=True)
class NoiseBoundReport:
    product: float
    robertson_ok: bool
    schroedinger_ok: bool


def check_noise_bound(cov: NoiseCovariance, tol: float = BOUND_TOL) -> NoiseBoundReport:
    """Check dX dP >= 1/2 and dX^2 dP^2 >= dXP^2 + 1/4 up to ``tol``."""
    m = cov.total
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * np.abs(m).max()):
        raise InconsistentInput("covariance is not symmetric")
    if np.linalg.eigvalsh(m).min() < -1e-12 * max(1.0, np.abs(m).max()):
        raise InconsistentInput("covariance is not positive semidefinite")
    product = cov.product
    return NoiseBoundReport(
        product,
        product >= 0.5 - tol,
        cov.delta_x2 * cov.delta_p2 >= cov.delta_xp ** 2 + 0.25 - tol,
    )
