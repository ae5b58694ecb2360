import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from scipy.integrate import quad, solve_ivp

from skram.helpers.mode_systems import HeatModeSystem, WaveModeSystem
from skram.helpers.noise_helper import (crossModeStepCovariance, heatConvolutionStepVar, jointStepCovariance,
                                        sampleIncrements, semidefiniteCholesky, waveConvolutionStepCov)
from skram.helpers.propagator_helper import waveModePropagator
from skram.models.covariance_spec import CovarianceSpec, lambdasOf
from skram.models.noise_stream import NoiseStream
from skram.models.spectral_basis import buildBasis
from skram.utils.run_report import ConfigurationError, InvalidParameterError


class NoiseStreamTest(unittest.TestCase):
    """Counter addressed reproducibility of the Gaussian source"""

    def test_same_key_same_draws(self):
        a = NoiseStream(42, 3).normals(7, (5, 4))
        b = NoiseStream(42, 3).normals(7, (5, 4))
        assert_array_equal(a, b)

    def test_streams_and_counters_differ(self):
        base = NoiseStream(42, 0).normals(0, 8)
        self.assertFalse(np.allclose(base, NoiseStream(42, 1).normals(0, 8)))
        self.assertFalse(np.allclose(base, NoiseStream(42, 0).normals(1, 8)))
        self.assertFalse(np.allclose(base, NoiseStream(43, 0).normals(0, 8)))

    def test_rows_do_not_depend_on_ensemble_size(self):
        stream = NoiseStream(9, 0)
        small = stream.normals(5, (2, 3, 2))
        large = stream.normals(5, (50, 3, 2))
        assert_array_equal(small, large[:2])

    def test_sample_increments(self):
        stream = NoiseStream(1, 0)
        draw = sampleIncrements(stream, 0.01, 2, nPaths=100000)
        self.assertEqual(stream.counter, 1)
        self.assertEqual(draw.shape, (100000, 2))
        assert_allclose(np.var(draw, axis=0), [0.01, 0.01], rtol=0.03)
        self.assertLess(abs(np.corrcoef(draw[:, 0], draw[:, 1])[0, 1]), 0.02)
        other = sampleIncrements(NoiseStream(1, 1), 0.01, 2, nPaths=100000)
        for k in range(2):
            self.assertLess(abs(np.corrcoef(draw[:, k], other[:, k])[0, 1]), 0.02)
        self.assertEqual(sampleIncrements(stream, 0.01, 3).shape, (3,))
        self.assertEqual(stream.counter, 2)
        with self.assertRaises(InvalidParameterError):
            sampleIncrements(stream, 0.0, 3)

    def test_negative_seed(self):
        with self.assertRaises(InvalidParameterError):
            NoiseStream(-1, 0)


class CovarianceTest(unittest.TestCase):
    """Power law covariance and its hypothesis flags"""

    def test_lambdas(self):
        basis = buildBasis(np.pi, 3)
        assert_allclose(CovarianceSpec("power_law", 2.0, 0.5).lambdas(basis), [2.0, 1.0, 2.0 / 3.0])
        assert_allclose(CovarianceSpec("white", 0.5, 3.0).lambdas(basis), [0.5, 0.5, 0.5])
        assert_allclose(lambdasOf(np.array([1.0, 2.0, 3.0]), basis), [1.0, 2.0, 3.0])

    def test_flags(self):
        flags = CovarianceSpec("white", d=1).flags()
        self.assertTrue(flags["finite_energy"])
        self.assertFalse(flags["trace_class"])
        self.assertTrue(CovarianceSpec(beta=0.3, d=1).flags()["trace_class"])
        self.assertFalse(CovarianceSpec(beta=0.1, d=3).flags()["power_law_bounds"])

    def test_invalid(self):
        with self.assertRaises(ConfigurationError):
            CovarianceSpec("pink")
        with self.assertRaises(ConfigurationError):
            CovarianceSpec(c=0.0)
        with self.assertRaises(ConfigurationError):
            CovarianceSpec(beta=-1.0)

    def test_dict(self):
        spec = CovarianceSpec("power_law", 1.5, 0.25, 2)
        self.assertEqual(CovarianceSpec.fromDict(spec.toDict()), spec)


class StepCovarianceTest(unittest.TestCase):
    """Exact one step covariances of the stochastic convolutions"""

    def test_heat_variance(self):
        alpha, lam, h = 4.0, 0.7, 0.05
        self.assertAlmostEqual(heatConvolutionStepVar(alpha, lam, h),
                               lam * lam * (1.0 - np.exp(-2.0 * alpha * h)) / (2.0 * alpha), places=14)

    def test_joint_heat(self):
        alpha, h = 2.0, 0.1
        cov = jointStepCovariance([HeatModeSystem(np.array([alpha]))], h)[0]
        expected = [[h, (1.0 - np.exp(-alpha * h)) / alpha],
                    [(1.0 - np.exp(-alpha * h)) / alpha, (1.0 - np.exp(-2.0 * alpha * h)) / (2.0 * alpha)]]
        assert_allclose(cov, expected, rtol=1e-10)

    def test_wave_against_quadrature(self):
        mu, alpha, lam, h = 0.2, 9.0, 1.3, 0.05
        cov = waveConvolutionStepCov(mu, alpha, lam, h)

        def entry(i, j):
            def integrand(s):
                c = waveModePropagator(mu, alpha, s)
                column = np.array([c.fv, c.gv]) * lam / mu
                return float(column[i] * column[j])
            return quad(integrand, 0.0, h, epsabs=1e-14, epsrel=1e-12)[0]

        expected = np.array([[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]])
        assert_allclose(cov, expected, rtol=1e-8)

    def test_wave_against_lyapunov_ode(self):
        mu, alpha, lam, h = 0.1, 4.0, 0.5, 0.3
        A = np.array([[0.0, 1.0], [-alpha / mu, -1.0 / mu]])
        BBt = np.outer([0.0, lam / mu], [0.0, lam / mu])

        def rhs(t, y):
            sigma = y.reshape(2, 2)
            return (A @ sigma + sigma @ A.T + BBt).reshape(-1)

        sol = solve_ivp(rhs, (0.0, h), np.zeros(4), method="DOP853", rtol=1e-12, atol=1e-14)
        assert_allclose(waveConvolutionStepCov(mu, alpha, lam, h), sol.y[:, -1].reshape(2, 2), rtol=0, atol=1e-8)

    def test_semigroup_consistency(self):
        for mu, alpha, lam in ((0.1, 4.0, 0.5), (0.25, 4.0, 1.0), (1.0, 1.0, 0.7)):
            h1, h2 = 0.13, 0.21
            phi = waveModePropagator(mu, alpha, h2).matrix()
            combined = (phi @ waveConvolutionStepCov(mu, alpha, lam, h1) @ phi.T
                        + waveConvolutionStepCov(mu, alpha, lam, h2))
            assert_allclose(waveConvolutionStepCov(mu, alpha, lam, h1 + h2), combined, rtol=0, atol=1e-8)
        alpha, lam, h1, h2 = 9.0, 1.3, 0.05, 0.02
        combined = (np.exp(-2.0 * alpha * h2) * heatConvolutionStepVar(alpha, lam, h1)
                    + heatConvolutionStepVar(alpha, lam, h2))
        self.assertAlmostEqual(heatConvolutionStepVar(alpha, lam, h1 + h2), combined, places=12)

    def test_cholesky_shares_rows_of_identical_systems(self):
        system = WaveModeSystem(np.array([1.0, 4.0]), 0.3)
        cov = jointStepCovariance([system, system], 0.01)
        L = semidefiniteCholesky(cov)
        assert_allclose(np.einsum("nij,nkj->nik", L, L), cov, atol=1e-12 * np.max(cov))
        assert_allclose(L[:, 3:5], L[:, 1:3], atol=1e-10)

    def test_mismatched_noise_dimension(self):
        from skram.helpers.mode_systems import RotatedHeatModeSystem
        with self.assertRaises(ConfigurationError):
            jointStepCovariance([HeatModeSystem(np.array([1.0])), RotatedHeatModeSystem(np.array([1.0]), 0.1)],
                                0.1)

    def test_cross_mode_heat(self):
        alphas, h = np.array([1.0, 3.0]), 0.2
        cov = crossModeStepCovariance([HeatModeSystem(alphas)], h).reshape(2, 2, 2, 2)
        for n in range(2):
            for m in range(2):
                rate = alphas[n] + alphas[m]
                self.assertAlmostEqual(cov[n, 0, m, 0], h, places=12)
                self.assertAlmostEqual(cov[n, 0, m, 1], (1.0 - np.exp(-alphas[m] * h)) / alphas[m], places=12)
                self.assertAlmostEqual(cov[n, 1, m, 1], (1.0 - np.exp(-rate * h)) / rate, places=12)

    def test_cross_mode_needs_scalar_noise(self):
        from skram.helpers.mode_systems import RotatedHeatModeSystem
        with self.assertRaises(ConfigurationError):
            crossModeStepCovariance([RotatedHeatModeSystem(np.array([1.0]), 0.1)], 0.1)
