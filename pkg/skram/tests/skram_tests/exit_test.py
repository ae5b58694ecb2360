import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose

from skram.helpers.exit_helper import (deterministicPrecheck, estimateExitTimes, exitPlaceHistogram,
                                       exitRecordsToCsv, exitStatistics, gridBiasAudit, minBoundaryQuasipotential,
                                       rateRegression, sandwichReport)
from skram.models.covariance_spec import CovarianceSpec
from skram.models.exit_domain import BoundaryPartition, ExitDomain, ExitRecord
from skram.models.nonlinearity import GradientType, ModeLipschitz, NemytskiiLipschitz, ZeroNonlinearity
from skram.models.solver_config import SolverConfig
from skram.models.spectral_basis import ModeField, PhaseState, buildBasis
from skram.utils.run_report import ConfigurationError, DomainError
from skram.utils.skram_config import SkramConfig


class DomainTest(unittest.TestCase):
    """Balls and boundary partitions"""

    def test_ball(self):
        domain = ExitDomain(2.0)
        assert_allclose(domain.contains(np.array([[1.0, 1.0], [2.0, 0.0]])), [True, False])
        with self.assertRaises(ConfigurationError):
            ExitDomain(0.0)

    def test_mode_cells(self):
        partition = BoundaryPartition()
        self.assertEqual(partition.cells(2), ["+e_1", "-e_1", "+e_2", "-e_2"])
        self.assertEqual(partition.cellOf([0.1, -0.9]), "-e_2")
        self.assertEqual(BoundaryPartition("single").cellOf([0.1, -0.9]), "boundary")

    def test_non_finite_place(self):
        with self.assertRaises(DomainError):
            BoundaryPartition().cellOf([np.nan, 0.2])
        with self.assertRaises(DomainError):
            BoundaryPartition("single").cellOf([np.inf])

    def test_halfspaces(self):
        partition = BoundaryPartition("halfspaces", [("right", [1.0, 0.0])])
        self.assertEqual(partition.cells(2), ["right", "rest"])
        self.assertEqual(partition.cellOf([0.5, 0.5]), "right")
        self.assertEqual(partition.cellOf([-1.0, 0.0]), "rest")
        with self.assertRaises(ConfigurationError):
            BoundaryPartition("halfspaces")
        with self.assertRaises(ConfigurationError):
            BoundaryPartition("octants")


class ReportTest(unittest.TestCase):
    """Tables built from exit records"""

    def test_rate_regression(self):
        table = [{"eps": eps, "mean_tau": np.exp((1.0 + 0.5 * eps) / eps), "censored_rate": 0.0}
                 for eps in (0.3, 0.2, 0.1)]
        result = rateRegression(table)
        self.assertAlmostEqual(result["limit"], 1.0, places=10)
        self.assertAlmostEqual(result["slope"], 0.5, places=10)
        self.assertTrue(np.isnan(result["ci_low"]))
        table[2]["censored_rate"] = 0.1
        with self.assertRaises(ConfigurationError):
            rateRegression(table)

    def test_regression_interval(self):
        rng = np.random.default_rng(0)
        records, table = [], []
        for eps in (0.3, 0.2, 0.1):
            taus = rng.exponential(np.exp(1.0 / eps), size=200)
            records += [ExitRecord(eps, j, tau, np.ones(1), False) for j, tau in enumerate(taus)]
            table.append({"eps": eps, "mean_tau": float(np.mean(taus)), "censored_rate": 0.0})
        result = rateRegression(table, records)
        self.assertLess(result["ci_low"], result["ci_high"])

    def test_histogram(self):
        records = [ExitRecord(0.5, j, 1.0, [1.0, 0.1], False) for j in range(3)]
        records.append(ExitRecord(0.5, 3, 1.0, [0.2, -1.0], False))
        records.append(ExitRecord(0.5, 4, 10.0, None, True))
        rows = exitPlaceHistogram(records, BoundaryPartition(), 2)
        self.assertEqual([row["cell"] for row in rows], ["+e_1", "-e_1", "+e_2", "-e_2"])
        assert_allclose([row["frequency"] for row in rows], [0.75, 0.0, 0.0, 0.25])
        self.assertEqual(sum(row["count"] for row in rows), 4)

    def test_sandwich(self):
        records = [ExitRecord(0.5, 0, 7.0, [1.0], False), ExitRecord(0.5, 1, 3.0, [1.0], False),
                   ExitRecord(0.5, 2, 5.0, None, True), ExitRecord(0.5, 3, 20.0, None, True)]
        row, = sandwichReport(records, 1.0, 0.1)
        self.assertAlmostEqual(row["lower"], np.exp(1.8))
        self.assertAlmostEqual(row["upper"], np.exp(2.2))
        self.assertEqual(row["inside_fraction"], 0.25)
        self.assertEqual(row["undetermined_fraction"], 0.25)

    def test_csv(self):
        records = [ExitRecord(0.5, 0, 7.0, [1.0, 0.0], False), ExitRecord(0.5, 1, 9.0, None, True)]
        with tempfile.TemporaryDirectory() as tmp:
            target = os.path.join(tmp, "exit.csv")
            exitRecordsToCsv(target, records, 2)
            with open(target) as stream:
                lines = stream.read().splitlines()
        self.assertEqual(lines[0], "eps,path_id,tau,censored,failed,exit_mode_1,exit_mode_2")
        self.assertEqual(len(lines), 3)

    def test_failed_records_stay_out_of_the_statistics(self):
        records = [ExitRecord(0.5, 0, 2.0, [1.0, 0.1], False, 0.05), ExitRecord(0.5, 1, 4.0, [0.2, -1.0], False),
                   ExitRecord(0.5, 2, 0.3, None, False, failed=True), ExitRecord(0.5, 3, 9.0, None, True)]
        self.assertTrue(records[2].failed)
        self.assertFalse(records[2].exited)
        row = exitStatistics(records)
        self.assertEqual((row["n_paths"], row["n_exits"], row["failed"]), (4, 2, 1))
        self.assertEqual(row["censored_rate"], 0.25)
        self.assertAlmostEqual(row["mean_tau"], 3.0)
        rows = exitPlaceHistogram(records, BoundaryPartition(), 2)
        self.assertEqual([row["count"] for row in rows], [1, 0, 0, 1])
        sandwich, = sandwichReport(records, 0.5, 0.2)
        self.assertEqual(sandwich["inside_fraction"], 0.5)
        self.assertEqual(sandwich["failed_fraction"], 0.25)

    def test_regression_skips_levels_with_failures(self):
        table = [{"eps": eps, "mean_tau": np.exp(1.0 / eps), "censored_rate": 0.0, "failed": 0}
                 for eps in (0.4, 0.3, 0.2, 0.1)]
        self.assertEqual(rateRegression(table)["eps"], [0.4, 0.3, 0.2, 0.1])
        table[0]["failed"] = 2
        self.assertEqual(rateRegression(table)["eps"], [0.3, 0.2, 0.1])
        table[1]["failed"] = 1
        with self.assertRaises(ConfigurationError):
            rateRegression(table)


class PrecheckTest(unittest.TestCase):
    """Noiseless flows that leave the domain are rejected"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 2)
        self.domain = ExitDomain(1.0)

    def test_forced_flow_leaves(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.01, T=1.0,
                           nonlinearity=NemytskiiLipschitz(self.basis, 0.0, 10.0))
        with self.assertRaises(ConfigurationError) as context:
            deterministicPrecheck("heat", self.domain, cfg, ModeField.zeros(self.basis), 10.0)
        self.assertIn("t=", str(context.exception))

    def test_start_outside(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), h=0.01, T=1.0)
        with self.assertRaises(ConfigurationError):
            deterministicPrecheck("heat", self.domain, cfg, ModeField(self.basis, [2.0, 0.0]), 10.0)

    def test_dissipative_flow(self):
        cfg = SolverConfig(self.basis, CovarianceSpec(), mu=0.2, h=0.01, T=1.0)
        z0 = PhaseState(ModeField(self.basis, [0.5, 0.0]), ModeField(self.basis, [0.5, 0.0]))
        largest = deterministicPrecheck("wave", self.domain, cfg, z0, 1e4)
        self.assertGreaterEqual(largest, 0.5)
        self.assertLess(largest, 1.0)


class ExitTimeTest(unittest.TestCase):
    """Monte Carlo exit times of small noise Ornstein-Uhlenbeck dynamics"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 1)
        self.cfg = SolverConfig(self.basis, CovarianceSpec("white", 1.0), h=0.01, T=1.0)
        self.domain = ExitDomain(0.5)

    def tearDown(self):
        SkramConfig.reset()

    def test_records_are_reproducible(self):
        rows, records = estimateExitTimes("heat", [1.0, 0.5], self.domain, self.cfg, 20, 200.0, seed=3)
        again, recordsAgain = estimateExitTimes("heat", [1.0, 0.5], self.domain, self.cfg, 20, 200.0, seed=3)
        self.assertEqual([r.tau for r in records], [r.tau for r in recordsAgain])
        self.assertEqual(len(rows), 2)
        self.assertEqual(len(records), 40)
        self.assertEqual([r.pathId for r in records[:20]], list(range(20)))
        for row in rows:
            self.assertEqual(row["censored_rate"], 0.0)
            self.assertEqual(row["n_exits"], 20)
            self.assertLessEqual(row["ci_low"], row["mean_tau"])
        for record in records:
            self.assertGreaterEqual(np.linalg.norm(record.exitField), 0.5)
            self.assertGreaterEqual(record.overshoot, 0.0)

    def test_blocks(self):
        _, records = estimateExitTimes("heat", [1.0], self.domain, self.cfg, 10, 200.0, seed=3, blockSize=4)
        self.assertEqual([r.pathId for r in records], list(range(10)))

    def test_censoring(self):
        rows, records = estimateExitTimes("heat", [0.01], ExitDomain(1.0), self.cfg, 5, 0.5, seed=1)
        self.assertEqual(rows[0]["censored_rate"], 1.0)
        self.assertTrue(all(r.tau == 0.5 and r.exitField is None for r in records))

    def test_blow_ups_are_failed_records(self):
        SkramConfig.blow_up_threshold = 1e-3
        rows, records = estimateExitTimes("heat", [1.0], self.domain, self.cfg, 6, 10.0, seed=2)
        self.assertEqual(rows[0]["failed"], 6)
        self.assertEqual(rows[0]["n_exits"], 0)
        self.assertEqual(rows[0]["censored_rate"], 0.0)
        self.assertTrue(np.isnan(rows[0]["mean_tau"]))
        self.assertEqual(rows[0]["overshoot_max"], 0.0)
        self.assertTrue(all(r.failed and r.exitField is None and 0.0 < r.tau < 10.0 for r in records))
        counts = [row["count"] for row in exitPlaceHistogram(records, BoundaryPartition(), 1)]
        self.assertEqual(counts, [0, 0])

    def test_grid_bias_audit(self):
        change = gridBiasAudit("heat", 1.0, self.domain, self.cfg, 200, 200.0, seed=5)
        self.assertTrue(np.isfinite(change))
        self.assertGreaterEqual(change, 0.0)

    def test_invalid_requests(self):
        with self.assertRaises(ConfigurationError):
            estimateExitTimes("magnetic", [1.0], self.domain, self.cfg, 4, 10.0, seed=0)
        with self.assertRaises(ConfigurationError):
            estimateExitTimes("heat", [0.0], self.domain, self.cfg, 4, 10.0, seed=0)
        with self.assertRaises(ConfigurationError):
            estimateExitTimes("wave", [1.0], self.domain, self.cfg, 4, 10.0, seed=0)

    def test_rate_matches_quasipotential(self):
        cfg = SolverConfig(self.basis, CovarianceSpec("white", 1.0), h=0.01, T=1.0)
        rows, records = estimateExitTimes("heat", [0.25, 0.2, 0.15], ExitDomain(1.0), cfg, 1200, 1e4, seed=11)
        self.assertTrue(all(row["censored_rate"] == 0.0 for row in rows))
        result = rateRegression(rows)
        # α₁r²/λ₁² with α₁ = 1, r = 1 and λ₁ = 1
        expected = self.basis.alphas[0] * 1.0 ** 2 / cfg.lambdas()[0] ** 2
        self.assertLess(abs(result["limit"] - expected) / expected, 0.15)


class BoundaryMinimumTest(unittest.TestCase):
    """Minimum of the quasi-potential over the sphere"""

    def setUp(self):
        self.basis = buildBasis(np.pi, 3)
        self.domain = ExitDomain(1.0)

    def test_linear(self):
        field, value = minBoundaryQuasipotential(self.domain, self.basis, ZeroNonlinearity(self.basis),
                                                 CovarianceSpec("white", 1.0))
        self.assertAlmostEqual(value, 1.0, places=8)
        self.assertAlmostEqual(abs(field.coeffs[0]), 1.0, places=4)

    def test_quadratic_potential(self):
        covariance = CovarianceSpec("power_law", 1.0, 0.5)
        F = GradientType(self.basis, covariance, "quadratic", kappa=1.0)
        _, value = minBoundaryQuasipotential(self.domain, self.basis, F, covariance)
        self.assertAlmostEqual(value, 2.0, places=8)

    def test_non_gradient_single_mode(self):
        basis = buildBasis(np.pi, 1)
        nonlinearity = ModeLipschitz(basis, 0.3)
        _, value = minBoundaryQuasipotential(self.domain, basis, nonlinearity, CovarianceSpec("white", 1.0), M=200)
        self.assertAlmostEqual(value, 1.0 + 0.6 * np.log(np.cosh(1.0)), delta=0.02)
