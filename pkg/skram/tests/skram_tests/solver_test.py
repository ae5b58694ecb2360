import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from skram.helpers.propagator_helper import waveModePropagator
from skram.helpers.solver_helper import (simulate, simulateCoupled, simulateCoupledPair, stepHeat, stepMagnetic,
                                         stepWave)
from skram.helpers.mode_systems import HeatModeSystem
from skram.models.covariance_spec import CovarianceSpec
from skram.models.noise_stream import NoiseStream
from skram.models.nonlinearity import GradientType, KleinGordon, NemytskiiLipschitz, NoiseCoefficient
from skram.models.solver_config import SolverConfig
from skram.models.spectral_basis import ModeField, PhaseState, buildBasis
from skram.utils.run_report import BlowUpError, ConfigurationError
from skram.utils.skram_config import SkramConfig


class SolverConfigTest(unittest.TestCase):
    """Validation of the solver configuration"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 3)

    def test_horizon_and_step(self):
        with self.assertRaises(ConfigurationError):
            SolverConfig(self.basis, CovarianceSpec(), h=0.0)
        with self.assertRaises(ConfigurationError):
            SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=0.05)
        self.assertEqual(SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=0.0).nSteps(), 0)
        self.assertEqual(SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=1.0).nSteps(), 10)

    def test_copy(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.5)
        self.assertEqual(cfg.copy(mu=0.1).mu, 0.1)
        self.assertEqual(cfg.mu, 0.5)
        with self.assertRaises(ConfigurationError):
            cfg.copy(temperature=1.0)

    def test_noise_scale(self):
        cfg = SolverConfig(self.basis, CovarianceSpec("white", 2.0), noiseScale=0.5)
        assert_allclose(cfg.lambdas(), [1.0, 1.0, 1.0])


class SimulateTest(unittest.TestCase):
    """Exponential Euler trajectories of the mode systems"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 3)
        self.u0 = ModeField(self.basis, [1.0, -0.5, 0.25])

    def tearDown(self):
        SkramConfig.reset()

    def test_noiseless_heat_is_exact(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=1.0, noiseScale=0.0)
        trajectory = simulate(cfg, self.u0, NoiseStream(0, 0))
        self.assertEqual(len(trajectory), 11)
        expected = self.u0.coeffs * np.exp(-self.basis.alphas * 1.0)
        assert_allclose(trajectory.final().coeffs, expected, rtol=1e-12)

    def test_noiseless_wave_is_exact(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.3, h=0.05, T=1.0, noiseScale=0.0)
        z0 = PhaseState(self.u0, ModeField(self.basis, [0.0, 1.0, 0.0]))
        trajectory = simulate(cfg, z0, NoiseStream(0, 0))
        c = waveModePropagator(0.3, self.basis.alphas, 1.0)
        u, v = c.apply(z0.position.coeffs, z0.velocity.coeffs)
        assert_allclose(trajectory.final().position.coeffs, u, atol=1e-12)
        assert_allclose(trajectory.final().velocity.coeffs, v, atol=1e-12)

    def test_zero_horizon(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=0.0)
        trajectory = simulate(cfg, self.u0, NoiseStream(0, 0))
        self.assertEqual(len(trajectory), 1)
        assert_array_equal(trajectory.final().coeffs, self.u0.coeffs)

    def test_record_every(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.1, T=1.0, recordEvery=5)
        trajectory = simulate(cfg, self.u0, NoiseStream(0, 0))
        assert_allclose(trajectory.times, [0.0, 0.5, 1.0])

    def test_first_path_independent_of_ensemble_size(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, h=0.01, T=0.2,
                           nonlinearity=NemytskiiLipschitz(self.basis, 1.0, 0.5))
        z0 = PhaseState(self.u0)
        alone = simulate(cfg, z0, NoiseStream(5, 0), nPaths=1)
        many = simulate(cfg, z0, NoiseStream(5, 0), nPaths=6)
        assert_array_equal(alone.states[:, 0], many.states[:, 0])

    def test_single_steps_follow_the_counter(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, h=0.01, T=0.03)
        z0 = PhaseState(self.u0)
        stream = NoiseStream(11, 0)
        z = z0
        for _ in range(3):
            z = stepWave(z, cfg, stream)
        self.assertEqual(stream.counter, 3)
        trajectory = simulate(cfg, z0, NoiseStream(11, 0))
        assert_allclose(z.position.coeffs, trajectory.final().position.coeffs, atol=1e-14)
        u = stepHeat(self.u0, cfg, NoiseStream(11, 0))
        self.assertEqual(u.coeffs.shape, (3,))

    def test_one_step_variance(self):
        basis = buildBasis(np.pi, 1)
        cfg = SolverConfig(basis, CovarianceSpec("white", 0.8), h=0.5, T=0.5)
        trajectory = simulate(cfg, ModeField.zeros(basis), NoiseStream(2, 0), nPaths=20000)
        expected = 0.64 * (1.0 - np.exp(-1.0)) / 2.0
        self.assertAlmostEqual(np.var(trajectory.positions()[-1, :, 0]), expected, delta=0.05 * expected)

    def test_stationary_wave_variances(self):
        basis = buildBasis(np.pi, 2)
        cfg = SolverConfig(basis, CovarianceSpec("white", 1.0), mu=0.5, h=0.01, T=200.0, recordEvery=10)
        trajectory = simulate(cfg, PhaseState(ModeField.zeros(basis)), NoiseStream(3, 0), nPaths=16)
        u = trajectory.positions()[200:]
        v = trajectory.velocities()[200:]
        assert_allclose(np.mean(u ** 2, axis=(0, 1)), 1.0 / (2.0 * basis.alphas), rtol=0.12)
        assert_allclose(np.mean(v ** 2, axis=(0, 1)), [1.0, 1.0], rtol=0.12)

    def test_multiplicative_noise_runs(self):
        g = NoiseCoefficient(self.basis, "bounded", 1.0, 0.5)
        cfg = SolverConfig(self.basis, CovarianceSpec(beta=0.5), mu=0.1, h=0.01, T=0.2, multiplicativeG=g,
                           nonlinearity=KleinGordon(self.basis, 1.0, 3.0, truncation=5.0))
        trajectory = simulate(cfg, PhaseState(self.u0), NoiseStream(1, 0), nPaths=4)
        self.assertTrue(np.all(np.isfinite(trajectory.states)))

    def test_multiplicative_cross_mode_covariance(self):
        h = 1.0
        g = NoiseCoefficient(self.basis, "lipschitz", 1.0, 0.5)
        cfg = SolverConfig(self.basis, CovarianceSpec("white", 1.0), h=h, T=h, multiplicativeG=g)
        trajectory = simulate(cfg, self.u0, NoiseStream(8, 0), nPaths=40000)
        alphas = self.basis.alphas
        xi = trajectory.positions()[-1] - np.exp(-alphas * h) * self.u0.coeffs
        G = g.modeMatrix(self.u0.coeffs[None], cfg.lambdas())[0]
        rate = alphas[:, None] + alphas[None, :]
        expected = (G @ G.T) * (1.0 - np.exp(-rate * h)) / rate
        observed = xi.T @ xi / xi.shape[0]
        se = np.sqrt((np.outer(np.diag(expected), np.diag(expected)) + expected ** 2) / xi.shape[0])
        self.assertTrue(np.all(np.abs(observed - expected) < 4.0 * se + 1e-12), f"{observed} vs {expected}")

    def test_klein_gordon_truncation_is_neutral_below_the_cutoff(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, h=0.01, T=0.5, noiseScale=0.3,
                           nonlinearity=KleinGordon(self.basis, 1.0, 3.0, truncation=3.0))
        low = simulate(cfg, PhaseState(self.u0), NoiseStream(6, 0), nPaths=8)
        high = simulate(cfg.copy(nonlinearity=cfg.nonlinearity.truncated(6.0)), PhaseState(self.u0),
                        NoiseStream(6, 0), nPaths=8)
        values = cfg.nonlinearity.grid.values(low.positions())
        self.assertLess(np.max(np.abs(values)), 3.0)
        assert_array_equal(low.states, high.states)
        sigma = np.linspace(-3.0, 3.0, 41)
        assert_array_equal(KleinGordon(self.basis, truncation=3.0).pointwise(sigma),
                           KleinGordon(self.basis, truncation=6.0).pointwise(sigma))

    def test_gradient_energy_decreases_without_noise(self):
        mu, kappa = 0.5, 1.0
        drift = GradientType(self.basis, CovarianceSpec(), "quadratic", kappa)
        cfg = SolverConfig(self.basis, CovarianceSpec(), drift, mu=mu, h=5e-4, T=2.0, noiseScale=0.0)
        z0 = PhaseState(self.u0, ModeField(self.basis, [0.5, 1.0, -1.0]))
        trajectory = simulate(cfg, z0, NoiseStream(0, 0))
        alphas = self.basis.alphas
        u, v = trajectory.positions()[:, 0], trajectory.velocities()[:, 0]
        energy = np.sum(mu * v ** 2 / alphas + u ** 2 + kappa * drift.lambdas ** 2 * u ** 2 / alphas, axis=-1)
        self.assertTrue(np.all(np.diff(energy) <= 1e-12 * energy[0]))
        self.assertLess(energy[-1], 0.5 * energy[0])

    def test_first_order_without_noise(self):
        basis = buildBasis(np.pi, 4)
        u0 = ModeField(basis, [1.0, -0.5, 0.25, 0.1])
        cfg = SolverConfig(basis, CovarianceSpec(), NemytskiiLipschitz(basis, 1.0, 1.0), T=1.0, noiseScale=0.0)
        reference = simulate(cfg.copy(h=0.02 / 64), u0, NoiseStream(0, 0)).final().coeffs
        steps = np.array([0.02, 0.01, 0.005])
        errors = [np.linalg.norm(simulate(cfg.copy(h=h), u0, NoiseStream(0, 0)).final().coeffs - reference)
                  for h in steps]
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        self.assertTrue(0.8 <= slope <= 1.2, f"slope {slope} from errors {errors}")

    def test_multiplicative_strong_order(self):
        basis = buildBasis(np.pi, 4)
        u0 = ModeField(basis, [1.0, -0.5, 0.25, 0.1])
        g = NoiseCoefficient(basis, "lipschitz", 0.5, 1.0)
        cfg = SolverConfig(basis, CovarianceSpec(), T=1.0, multiplicativeG=g)
        fine = 1.0 / 128

        def run(h):
            # refine keeps the fine noise blocks of every level on the same counters
            level = cfg.copy(h=h, refine=int(round(h / fine)))
            return simulate(level, u0, NoiseStream(21, 0), nPaths=256).positions()[-1]

        reference = run(fine)
        steps = np.array([1.0 / 16, 1.0 / 32, 1.0 / 64])
        errors = [np.sqrt(np.mean(np.sum((run(h) - reference) ** 2, axis=-1))) for h in steps]
        self.assertTrue(errors[0] > errors[1] > errors[2], f"errors {errors}")
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        self.assertGreater(slope, 0.45)

    def test_blow_up(self):
        SkramConfig.blow_up_threshold = 1e-3
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.01, T=0.1)
        with self.assertRaises(BlowUpError) as context:
            simulate(cfg, self.u0, NoiseStream(0, 0), nPaths=3)
        self.assertEqual(context.exception.step, 0)
        self.assertEqual(context.exception.paths, [0, 1, 2])
        trajectory = simulate(cfg.copy(strict=False), self.u0, NoiseStream(0, 0), nPaths=3)
        self.assertTrue(np.all(trajectory.failed))
        self.assertTrue(np.all(np.isnan(trajectory.states[-1])))

    def test_magnetic_step_needs_two_components(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, eps=0.1)
        with self.assertRaises(ConfigurationError):
            stepMagnetic(PhaseState(self.u0), cfg, NoiseStream(0, 0))

    def test_csv_export(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, h=0.1, T=0.3)
        trajectory = simulate(cfg, PhaseState(self.u0), NoiseStream(0, 0))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "wave.csv")
            trajectory.toCsv(path)
            with open(path) as stream:
                lines = stream.read().splitlines()
        self.assertEqual(lines[0], "t,mode_1_u,mode_2_u,mode_3_u,mode_1_v,mode_2_v,mode_3_v")
        self.assertEqual(len(lines), 5)


class CoupledTest(unittest.TestCase):
    """Several systems driven by one noise"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 4)
        self.cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.01, T=0.5,
                                nonlinearity=NemytskiiLipschitz(self.basis, 1.0))

    def test_identical_systems_stay_identical(self):
        heat = HeatModeSystem(self.basis.alphas)
        start = np.zeros((8, 4, 1))
        _, sup = simulateCoupled(self.cfg, [heat, heat], [start, start], NoiseStream(4, 0))
        assert_array_equal(sup, np.zeros(8))

    def test_pair_distance_shrinks_with_mass(self):
        z0 = PhaseState(ModeField.zeros(self.basis))
        errors = []
        for mu in (0.5, 0.01):
            _, _, sup = simulateCoupledPair(self.cfg.copy(mu=mu), self.cfg, z0, NoiseStream(4, 0), nPaths=16)
            errors.append(np.median(sup))
        self.assertLess(errors[1], errors[0])

    def test_mismatched_configurations(self):
        z0 = PhaseState(ModeField.zeros(self.basis))
        with self.assertRaises(ConfigurationError):
            simulateCoupledPair(self.cfg.copy(mu=0.1), self.cfg.copy(h=0.02), z0, NoiseStream(0, 0))
