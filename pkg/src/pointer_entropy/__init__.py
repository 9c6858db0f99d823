"""Entropic uncertainty of open pointer-based simultaneous measurements of position and momentum."""

from .distributions import (GaussianDensity, GaussianFilterCoefficients, JointGaussian,
                            broadened_marginal, filter_coefficients, joint_distribution)
from .dynamics import (InferenceCoefficients, NotInvertible, Propagator, SegmentMismatch,
                       inference_coefficients, lambda_kernel, propagate, shift)
from .entropy import (EntropyReport, collective_entropy, differential_entropy,
                      hirschman_check, lieb_bound, minimal_entropy_state)
from .model import (ContinuousBath, DiscreteBath, GaussianState, GridDensity,
                    MeasurementChoice, OhmicExponential, PiecewiseConstant,
                    PointerPreparation, QuadraticModel, TabulatedState,
                    assemble_generator, discretize_bath)
from .noise import (NoiseCovariance, check_noise_bound, noise_covariance, noise_kernel,
                    pointer_covariance)

__all__ = [name for name in dir() if not name.startswith("_")]
