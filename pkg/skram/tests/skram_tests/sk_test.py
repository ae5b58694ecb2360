import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from skram.helpers.sk_helper import (holderIncrementDiagnostic, residualDiagnostic, runMagneticDoubleLimit,
                                     runSkConvergence, sinIntegralVariance, sinOscillationVariance, summarizeErrors)
from skram.helpers.solver_helper import simulate
from skram.models.covariance_spec import CovarianceSpec
from skram.models.noise_stream import NoiseStream
from skram.models.nonlinearity import KleinGordon, ModeLipschitz, NemytskiiLipschitz, NoiseCoefficient
from skram.models.polynomial_field import PolynomialTestFunction
from skram.models.solver_config import SolverConfig
from skram.models.spectral_basis import ModeField, PhaseState, buildBasis
from skram.utils.run_report import ConfigurationError, HypothesisError
from skram.utils.utils import bootstrapInterval


class SummaryTest(unittest.TestCase):

    def test_failed_paths_are_counted(self):
        row = summarizeErrors([1.0, 2.0, np.nan, 3.0])
        self.assertEqual(row["failed"], 1)
        self.assertEqual(row["median"], 2.0)
        self.assertLessEqual(row["ci_low"], row["median"])
        self.assertGreaterEqual(row["ci_high"], row["median"])

    def test_all_failed(self):
        row = summarizeErrors([np.nan, np.nan])
        self.assertEqual(row["failed"], 2)
        self.assertTrue(np.isnan(row["median"]))

    def test_bootstrap_interval(self):
        samples = NoiseStream(0, 0).normals(0, 400) + 2.0
        low, high = bootstrapInterval(samples, np.mean, 500, seed=1)
        self.assertLess(low, np.mean(samples))
        self.assertGreater(high, np.mean(samples))
        self.assertAlmostEqual(high - low, 2.0 * 1.96 / 20.0, delta=0.05)
        self.assertEqual((low, high), bootstrapInterval(samples, np.mean, 500, seed=1))
        self.assertEqual(bootstrapInterval([3.0, np.nan], np.median), (3.0, 3.0))
        self.assertTrue(np.all(np.isnan(bootstrapInterval([np.nan, np.inf]))))


class SmallMassTest(unittest.TestCase):
    """Convergence of the damped wave equation to the heat equation"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 4)
        self.cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.005, T=0.5,
                                nonlinearity=NemytskiiLipschitz(self.basis, 1.0))

    def test_errors_decrease_along_the_ladder(self):
        rows = runSkConvergence([0.5, 0.05, None], self.cfg, 16, seed=3)
        self.assertEqual(len(rows), 3)
        self.assertGreater(rows[0]["median"], rows[1]["median"])
        self.assertTrue(np.isnan(rows[2]["mu"]))
        self.assertEqual(rows[2]["median"], 0.0)
        self.assertTrue(all(row["failed"] == 0 for row in rows))

    def test_same_seed_same_table(self):
        first = runSkConvergence([0.1], self.cfg, 4, seed=8)
        second = runSkConvergence([0.1], self.cfg, 4, seed=8)
        self.assertEqual(first, second)

    def test_rejects_mode_nonlinearity(self):
        cfg = self.cfg.copy(nonlinearity=ModeLipschitz(self.basis))
        with self.assertRaises(ConfigurationError):
            runSkConvergence([0.1], cfg, 4, seed=0)

    def test_rough_noise_is_rejected(self):
        cfg = self.cfg.copy(covariance=CovarianceSpec(d=3))
        with self.assertRaises(HypothesisError):
            runSkConvergence([0.1], cfg, 4, seed=0)

    def test_unbounded_multiplicative_klein_gordon_is_rejected(self):
        g = NoiseCoefficient(self.basis, "lipschitz", 1.0, 0.5)
        cfg = self.cfg.copy(nonlinearity=KleinGordon(self.basis), multiplicativeG=g)
        with self.assertRaises(HypothesisError):
            runSkConvergence([0.1], cfg, 4, seed=0)

    def test_multiplicative_klein_gordon_ladder(self):
        basis = buildBasis(np.pi, 8)
        cfg = SolverConfig(basis, CovarianceSpec(), KleinGordon(basis), h=0.002, T=1.0,
                           multiplicativeG=NoiseCoefficient(basis, "bounded", 1.0, 0.5))
        rows = runSkConvergence([0.5, 0.1, 0.02, 0.004], cfg, 64, seed=2)
        medians = [row["median"] for row in rows]
        self.assertTrue(all(a > b for a, b in zip(medians, medians[1:])), f"medians {medians}")
        self.assertTrue(all(row["failed"] == 0 for row in rows))


class ResidualTest(unittest.TestCase):
    """Integration by parts residual of the wave equation"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 2)

    def test_noiseless_residual_is_the_momentum_term(self):
        mu = 0.5
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=mu, h=1e-3, T=1.0, noiseScale=0.0)
        z0 = PhaseState(ModeField(self.basis, [1.0, 0.5]), ModeField(self.basis, [0.3, 0.0]))
        trajectory = simulate(cfg, z0, NoiseStream(0, 0), recordNoise=True)
        phi = PolynomialTestFunction.singleMode(self.basis, 1)
        terms = residualDiagnostic(trajectory, phi, mu)
        R = terms["residual"]
        self.assertEqual(R.shape, (terms["times"].size, 1))
        v = trajectory.velocities()[:, 0, 0]
        assert_allclose(R[:, 0], mu * (v[0] - v), atol=1e-5)
        assert_array_equal(terms["noise"], np.zeros_like(R))
        assert_array_equal(terms["time"], np.zeros_like(R))

    def test_noiseless_residual_with_moving_test_function(self):
        mu = 0.5
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=mu, h=1e-3, T=1.0, noiseScale=0.0)
        z0 = PhaseState(ModeField(self.basis, [1.0, 0.5]), ModeField(self.basis, [0.3, -0.2]))
        trajectory = simulate(cfg, z0, NoiseStream(0, 0), recordNoise=True)
        a, b = np.array([1.0, 0.5]), np.array([0.5, -1.0])
        phi = PolynomialTestFunction(self.basis, np.column_stack([a, b]))
        terms = residualDiagnostic(trajectory, phi, mu)
        t = terms["times"]
        u = trajectory.positions()[:, 0, :]
        v = trajectory.velocities()[:, 0, :]
        # μ(⟨v₀, φ(0)⟩ − ⟨v(t), φ(t)⟩ + ∫⟨v, ∂φ/∂t⟩) for φ_k = a_k + b_k t
        expected = mu * (v[0] @ a - np.sum(v * (a + b * t[:, None]), axis=1) + (u - u[0]) @ b)
        assert_allclose(terms["residual"][:, 0], expected, atol=1e-5)
        assert_allclose(terms["defect"][:, 0], expected, atol=1e-5)
        self.assertGreater(np.max(np.abs(terms["time"])), 1e-2)
        total = terms["initial"] + terms["drift"] + terms["time"] + terms["noise"]
        assert_allclose(terms["residual"], total, atol=1e-14)

    def test_residual_agrees_with_defect_under_noise(self):
        mu = 0.2
        cfg = SolverConfig(self.basis, CovarianceSpec("white", 1.0), mu=mu, h=1e-3, T=0.5)
        z0 = PhaseState(ModeField(self.basis, [1.0, 0.5]))
        trajectory = simulate(cfg, z0, NoiseStream(6, 0), nPaths=4, recordNoise=True)
        phi = PolynomialTestFunction(self.basis, [[1.0, 0.5], [0.5, -1.0]])
        terms = residualDiagnostic(trajectory, phi, mu)
        self.assertGreater(np.max(np.abs(terms["noise"])), 0.0)
        scale = np.max(np.abs(terms["defect"]))
        self.assertLess(np.max(np.abs(terms["residual"] - terms["defect"])), 0.05 * scale)

    def test_needs_recorded_noise(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.5, h=0.01, T=0.1)
        trajectory = simulate(cfg, PhaseState(ModeField.zeros(self.basis)), NoiseStream(0, 0))
        with self.assertRaises(ConfigurationError):
            residualDiagnostic(trajectory, PolynomialTestFunction.singleMode(self.basis, 1))

    def test_needs_a_wave_trajectory(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.01, T=0.1)
        trajectory = simulate(cfg, ModeField.zeros(self.basis), NoiseStream(0, 0), recordNoise=True)
        with self.assertRaises(ConfigurationError):
            residualDiagnostic(trajectory, PolynomialTestFunction.singleMode(self.basis, 1))

    def test_time_dependent_test_function(self):
        phi = PolynomialTestFunction(self.basis, [[1.0, 2.0, 3.0], [0.0, 0.0, 1.0]])
        assert_allclose(phi.values([2.0]), [[17.0, 4.0]])
        assert_allclose(phi.derivative([2.0]), [[14.0, 4.0]])
        assert_allclose(phi.derivative([2.0], order=2), [[6.0, 2.0]])
        assert_array_equal(phi.derivative([2.0], order=3), np.zeros((1, 2)))
        assert_allclose(phi.laplacian([2.0]), [[-17.0, -16.0]])


class SinVarianceTest(unittest.TestCase):
    """The oscillating stochastic integral keeps variance t/2"""

    def test_quadrature(self):
        for mu in (0.3, 0.01, 0.001):
            expected = 0.5 - mu * np.sin(2.0 / mu) / 4.0
            self.assertAlmostEqual(sinIntegralVariance(mu, 1.0), expected, places=9)
        with self.assertRaises(ConfigurationError):
            sinIntegralVariance(0.0, 1.0)

    def test_monte_carlo(self):
        rows = sinOscillationVariance([0.1, 0.01], 1.0, 4000, seed=5)
        for row in rows:
            self.assertLess(abs(row["mc"] - row["exact"]), 5.0 * row["se"])
            self.assertEqual(row["limit"], 0.5)


class MagneticTest(unittest.TestCase):
    """Magnetic system and its rotated heat limit"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 2, vectorDim=2)

    def test_needs_two_components(self):
        basis = buildBasis(np.pi, 2)
        cfg = SolverConfig(basis, CovarianceSpec(beta=0.5), h=0.01, T=0.1)
        with self.assertRaises(ConfigurationError):
            runMagneticDoubleLimit([0.1], [0.5], cfg, 2, seed=0)

    def test_eps_column_needs_trace_class(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(beta=0.0), h=0.01, T=0.1)
        with self.assertRaises(HypothesisError):
            runMagneticDoubleLimit([0.1], [0.5], cfg, 2, seed=0)
        result = runMagneticDoubleLimit([0.1], [0.5], cfg, 2, seed=0, epsLimit=False)
        self.assertEqual(result["eps_column"], [])

    def test_tables(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(beta=0.5), h=0.01, T=0.3)
        result = runMagneticDoubleLimit([0.2, 0.02], [0.5, 0.0], cfg, 4, seed=1)
        self.assertEqual([(row["eps"], row["mu"]) for row in result["matrix"]],
                         [(0.5, 0.2), (0.5, 0.02), (0.0, 0.2), (0.0, 0.02)])
        self.assertTrue(all(np.isfinite(row["median"]) for row in result["matrix"]))
        self.assertEqual([row["eps"] for row in result["eps_column"]], [0.5])


class HolderTest(unittest.TestCase):

    def test_increments_grow_with_the_lag(self):
        basis = buildBasis(np.pi, 4)
        cfg = SolverConfig(basis, CovarianceSpec(), h=0.01, T=4.0)
        trajectory = simulate(cfg, ModeField.zeros(basis), NoiseStream(2, 0), nPaths=32)
        result = holderIncrementDiagnostic(trajectory, [1, 4, 16])
        self.assertTrue(np.all(np.diff(result["mean_square"]) > 0))
        assert_allclose(result["tau"], [0.01, 0.04, 0.16])
        self.assertGreater(result["exponent"], 0.0)

    def test_needs_two_lags(self):
        basis = buildBasis(np.pi, 2)
        cfg = SolverConfig(basis, CovarianceSpec(), h=0.1, T=0.3)
        trajectory = simulate(cfg, ModeField.zeros(basis), NoiseStream(0, 0))
        with self.assertRaises(ConfigurationError):
            holderIncrementDiagnostic(trajectory, [1, 10])
