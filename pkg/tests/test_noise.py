import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointer_entropy.dynamics import inference_coefficients, propagate
from pointer_entropy.model import (ContinuousBath, DiscreteBath, MeasurementChoice,
                                   OhmicExponential, PiecewiseConstant, PointerPreparation,
                                   QuadraticModel, discretize_bath)
from pointer_entropy.noise import (GridTooCoarse, InconsistentInput, NoiseCovariance,
                                   check_noise_bound, noise_covariance, noise_kernel,
                                   pointer_covariance, route_disagreement)

X1X2 = MeasurementChoice.X1X2


def ak_noise_oracle(v1, v2, kappa, t):
    k2 = (kappa * t) ** 2
    return v1 / k2 + k2 / (16 * v2), v2 / k2 + k2 / (16 * v1)


class TestPointerCovariance:
    def test_examples(self):
        np.testing.assert_array_equal(pointer_covariance(PointerPreparation(0.5, 0.5)), np.diag([0.5] * 4))
        v = pointer_covariance(PointerPreparation(0.25, 2.0))
        assert v[0, 0] == 0.25 and v[2, 2] == 1.0

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_minimum_uncertainty(self, a, b):
        assert np.linalg.det(pointer_covariance(PointerPreparation(a, b))) == pytest.approx(1 / 16, rel=1e-12)


class TestNoiseKernel:
    single = DiscreteBath([1.0], [2.0], [[0.3, 0.0, 0.0]], beta=1.0)

    def test_single_mode(self):
        nu = noise_kernel(self.single, taus=0.0).values
        assert nu[0, 0] == pytest.approx(0.5 / math.tanh(1.0) * 0.09 / 2, rel=1e-14)
        assert np.count_nonzero(nu) == 1

    def test_zero_temperature_limit(self):
        nu = noise_kernel(self.single, beta=1e6, taus=0.0).values
        assert nu[0, 0] == pytest.approx(0.5 * 0.09 / 2, rel=1e-14)

    def test_even_and_symmetric(self, ak_ohmic):
        half = np.linspace(0, 3, 31)
        taus = np.concatenate([-half[:0:-1], half])
        nu = noise_kernel(ak_ohmic.bath, taus=taus).values
        np.testing.assert_array_equal(nu, nu[::-1])
        np.testing.assert_array_equal(nu, nu.transpose(0, 2, 1))
        assert np.linalg.eigvalsh(nu[30]).min() > -1e-14

    def test_converges_to_spectral_integral(self):
        """Discrete kernel approaches the continuum integral (quadrature oracle)."""
        from scipy.integrate import quad
        fam = OhmicExponential(0.1, 2.0)
        tau = 0.7
        exact, _ = quad(lambda w: 0.5 / math.tanh(0.5 * w) * math.cos(w * tau) * fam.density(w),
                        0, 16, limit=400, epsabs=1e-13)
        errs = [abs(noise_kernel(discretize_bath(ContinuousBath(fam, 1.0, n)), taus=tau).values[0, 0] - exact)
                for n in (500, 2000, 8000)]
        assert errs[-1] < 0.02 * exact
        assert errs[1] < errs[0] / 2.5 and errs[2] < errs[1] / 2.5


class TestAKCovariance:
    def test_standard_pointers(self, ak_closed):
        c = inference_coefficients(ak_closed, X1X2, 1.0)
        cov = noise_covariance(ak_closed, c, PointerPreparation(0.5, 0.5))
        assert cov.delta_x2 == pytest.approx(0.625, abs=1e-12)
        assert cov.delta_p2 == pytest.approx(0.625, abs=1e-12)
        assert abs(cov.delta_xp) < 1e-14

    def test_optimal_pointers_saturate(self, ak_closed):
        c = inference_coefficients(ak_closed, X1X2, 1.0)
        cov = noise_covariance(ak_closed, c, PointerPreparation(0.25, 0.25))
        assert abs(cov.delta_x2 - 0.5) < 1e-12 and abs(cov.delta_p2 - 0.5) < 1e-12
        rep = check_noise_bound(cov)
        assert rep.robertson_ok and rep.schroedinger_ok
        assert rep.product == pytest.approx(0.5, abs=1e-12)

    def test_random_tuples_match_closed_form(self):
        rng = np.random.default_rng(2024)
        for _ in range(20):
            v1, v2 = rng.uniform(0.05, 3, 2)
            kappa, t = rng.uniform(0.3, 3), rng.uniform(0.2, 2.5)
            prop = propagate(QuadraticModel.arthurs_kelly(kappa), grid=[0.0, t])
            cov = noise_covariance(prop, inference_coefficients(prop, X1X2, t), PointerPreparation(v1, v2))
            dx2, dp2 = ak_noise_oracle(v1, v2, kappa, t)
            assert abs(cov.delta_x2 - dx2) < 1e-10 and abs(cov.delta_p2 - dp2) < 1e-10
            assert abs(cov.delta_xp) < 1e-10

    def test_decoupled_bath_contributes_nothing(self):
        spec = ContinuousBath(OhmicExponential(0.05, 5.0), 1.0, 16,
                              switch=PiecewiseConstant.constant(0.0))
        model = QuadraticModel.arthurs_kelly(1.0, spec)
        prop = propagate(model, grid=np.linspace(0, 1, 11))
        c = inference_coefficients(prop, X1X2, 1.0)
        for route in ("direct", "kernel"):
            cov = noise_covariance(prop, c, PointerPreparation(0.5, 0.5), route)
            assert not np.any(cov.bath)
            assert cov.delta_x2 == pytest.approx(0.625, abs=1e-12)


class TestBath:
    def test_routes_agree(self, ak_ohmic):
        c = inference_coefficients(ak_ohmic, X1X2, 1.0)
        prep = PointerPreparation(0.25, 0.25)
        direct = noise_covariance(ak_ohmic, c, prep, "direct")
        kernel = noise_covariance(ak_ohmic, c, prep, "kernel")
        assert np.abs(direct.bath).max() > 1e-3
        assert route_disagreement(direct, kernel) < 1e-4

    def test_bath_part_psd(self, ak_ohmic):
        c = inference_coefficients(ak_ohmic, X1X2, 0.6)
        for route in ("direct", "kernel"):
            assert np.linalg.eigvalsh(noise_covariance(ak_ohmic, c, PointerPreparation(1, 1), route).bath).min() >= -1e-14

    def test_temperature_raises_noise(self, ak_ohmic):
        c = inference_coefficients(ak_ohmic, X1X2, 1.0)
        prep = PointerPreparation(0.25, 0.25)
        cold = noise_covariance(ak_ohmic, c, prep, beta=10.0)
        hot = noise_covariance(ak_ohmic, c, prep, beta=0.1)
        assert hot.bath[0, 0] > cold.bath[0, 0] > 0

    def test_coarse_grid_detected(self, ohmic_spec):
        model = QuadraticModel.arthurs_kelly(1.0, ohmic_spec)
        prop = propagate(model, grid=np.linspace(0, 1, 6))
        c = inference_coefficients(prop, X1X2, 1.0)
        with pytest.raises(GridTooCoarse):
            noise_covariance(prop, c, PointerPreparation(0.25, 0.25), "kernel")
        noise_covariance(prop, c, PointerPreparation(0.25, 0.25), "kernel", check=False)

    def test_unknown_route(self, ak_closed):
        c = inference_coefficients(ak_closed, X1X2, 1.0)
        with pytest.raises(ValueError):
            noise_covariance(ak_closed, c, PointerPreparation(0.5, 0.5), "magic")


class TestBoundCheck:
    def test_saturating(self):
        rep = check_noise_bound(NoiseCovariance.from_terms(0.5, 0.5, 0.0))
        assert rep.robertson_ok and rep.schroedinger_ok

    def test_unphysical(self):
        assert not check_noise_bound(NoiseCovariance.from_terms(0.2, 0.2, 0.0)).robertson_ok

    def test_correlated(self):
        assert check_noise_bound(NoiseCovariance.from_terms(1.0, 1.0, 0.5)).schroedinger_ok

    def test_rejects_indefinite(self):
        with pytest.raises(InconsistentInput):
            check_noise_bound(NoiseCovariance.from_terms(1.0, 1.0, 2.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounds_hold_for_random_open_ak(seed):
    rng = np.random.default_rng(seed)
    spec = ContinuousBath(OhmicExponential(rng.uniform(0, 0.3), rng.uniform(0.5, 3)),
                          rng.uniform(0.2, 5), int(rng.integers(1, 12)),
                          pattern=tuple(rng.uniform(0, 1, 3)))
    t = float(rng.uniform(0.3, 2))
    prop = propagate(QuadraticModel.arthurs_kelly(rng.uniform(0.3, 2), spec), grid=np.linspace(0, t, 9))
    c = inference_coefficients(prop, X1X2, t)
    cov = noise_covariance(prop, c, PointerPreparation(*rng.uniform(0.05, 2, 2)))
    rep = check_noise_bound(cov)
    assert rep.robertson_ok and rep.schroedinger_ok
    assert np.linalg.eigvalsh(cov.bath).min() >= -1e-12
