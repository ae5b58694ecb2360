import numpy as np
from loguru import logger

from skram.helpers.action_helper import compareVmuToV, gradientQuasipotential, minimizeAction
from skram.helpers.exit_helper import (estimateExitTimes, exitPlaceHistogram, exitRecordsToCsv, gridBiasAudit,
                                       minBoundaryQuasipotential, rateRegression, sandwichReport)
from skram.helpers.sk_helper import (residualDiagnostic, runMagneticDoubleLimit, runSkConvergence,
                                     sinOscillationVariance)
from skram.helpers.solver_helper import simulate
from skram.helpers.stationary_helper import marginalMuIndependenceTest, samplesToCsv
from skram.models.exit_domain import BoundaryPartition, ExitDomain
from skram.models.noise_stream import NoiseStream
from skram.models.polynomial_field import PolynomialTestFunction
from skram.runners.runner import Runner
from skram.utils.run_report import ConfigurationError


class SkLimitRunner(Runner):
    """Coupled wave and heat paths along a decreasing mass ladder."""

    def main_func(self, cfg):
        z0 = self.config.initialState(cfg.basis)
        rows = runSkConvergence(self.block.mu_ladder, cfg, self.block.n_paths, self.config.seed, z0)
        medians = [row["median"] for row in rows]
        decreasing = bool(all(a > b for a, b in zip(medians, medians[1:])))
        return rows, {"median_decreasing": decreasing, "rows": rows}

    @staticmethod
    def getName():
        return "sk-limit"

    @staticmethod
    def getAnchor():
        return "damped wave paths converge to heat paths on finite horizons as the mass goes to 0"


class MagneticRunner(Runner):
    """Error matrix of the magnetic system over (ε, μ) and the ε→0 column."""

    def main_func(self, cfg):
        z0 = self.config.initialState(cfg.basis)
        result = runMagneticDoubleLimit(self.block.mu_ladder, self.block.eps_ladder, cfg, self.block.n_paths,
                                        self.config.seed, z0, self.block.eps_limit)
        if result["eps_column"]:
            self.writeTable("eps_column.csv", result["eps_column"])
        return result["matrix"], result

    @staticmethod
    def getName():
        return "magnetic"

    @staticmethod
    def getAnchor():
        return "with friction ε > 0 the magnetic system has a small mass limit, which fails at ε = 0"


class ResidualRunner(Runner):
    """Integration by parts residual of the wave equation at the horizon."""

    def main_func(self, cfg):
        if cfg.T <= 0:
            raise ConfigurationError("the residual experiment needs a positive horizon solver.T")
        if self.block.test_mode > cfg.basis.N:
            raise ConfigurationError(f"residual.test_mode must be at most N={cfg.basis.N}")
        phi = PolynomialTestFunction.singleMode(cfg.basis, self.block.test_mode, self.block.amplitude)
        z0 = self.config.initialState(cfg.basis)
        rows = []
        for mu in self.block.mu_ladder:
            runCfg = cfg.copy(mu=mu, recordEvery=1, strict=False)
            trajectory = simulate(runCfg, z0, NoiseStream(self.config.seed, 0), kind="wave",
                                  nPaths=self.block.n_paths, recordNoise=True)
            terms = residualDiagnostic(trajectory, phi, mu)
            residual = terms["residual"][-1]
            square = residual ** 2
            finite = np.isfinite(square)
            se = float(np.std(square[finite], ddof=1) / np.sqrt(finite.sum())) if finite.sum() > 1 else float("nan")
            gap = np.abs(residual - terms["defect"][-1])[finite]
            rows.append({"mu": float(mu), "mean_square": float(np.mean(square[finite])), "se": se,
                         "max_abs": float(np.max(np.abs(residual[finite]))) if gap.size else float("nan"),
                         "mean_noise_square": float(np.mean(terms["noise"][-1][finite] ** 2)),
                         "defect_gap": float(np.max(gap)) if gap.size else float("nan"),
                         "failed": int((~finite).sum())})
            logger.info(f"residual mu={mu}: E|R(T)|² = {rows[-1]['mean_square']:.6g}")
        return rows, {"rows": rows, "horizon": cfg.T}

    @staticmethod
    def getName():
        return "residual"

    @staticmethod
    def getAnchor():
        return "the weak form residual of the wave equation against the heat equation vanishes with the mass"


class StationaryRunner(Runner):
    """Stationary position marginals at two masses against each other and the Boltzmann reference."""

    def main_func(self, cfg):
        block = self.block
        report = marginalMuIndependenceTest(block.mu_a, block.mu_b, cfg, block.T, self.config.seed, block.n_paths,
                                            block.burn_in, block.modes, block.record_every, block.mcmc_samples)
        samples = report.pop("reference_samples", None)
        if samples is not None:
            samplesToCsv(self.artifactPath("reference_samples.csv"), samples)
        return report["rows"], report

    @staticmethod
    def getName():
        return "stationary"

    @staticmethod
    def getAnchor():
        return "the position marginal of the invariant measure does not depend on the mass"


class QuasipotentialRunner(Runner):
    """Minimum action paths and quasi-potential values."""

    def main_func(self, cfg):
        block = self.block
        nl, cov, basis = cfg.nonlinearity, cfg.covariance, cfg.basis
        u = np.asarray(block.endpoint, dtype=float)
        if block.mode == "compare":
            rows = compareVmuToV(u, block.mu_ladder, nl, cov, basis, block.T, block.M)
            return rows, {"rows": rows}
        mu = block.mu if block.mode == "wave" else 0.0
        result = minimizeAction(u, basis, nl, cov, block.mode, mu=block.mu, endpointVelocity=block.endpoint_velocity,
                                T=block.T, M=block.M, growth=block.growth)
        row = {"mode": block.mode, "mu": mu, "value": result.value, "closed_form": float("nan")}
        if nl.isGradient:
            velocity = block.endpoint_velocity if block.mode == "wave" else None
            row["closed_form"] = gradientQuasipotential(u, velocity, mu, nl, cov, basis)
        row.update({"converged": result.converged, "iterations": result.iterations,
                    "gradient_norm": result.gradientNormAtExit})
        result.minimizer.checkDecay()
        result.minimizer.toCsv(self.artifactPath("minimizer.csv"))
        record = result.toDict()
        record["closed_form"] = row["closed_form"]
        return [row], record

    @staticmethod
    def getName():
        return "quasipotential"

    @staticmethod
    def getAnchor():
        return "the quasi-potential is the minimal action over paths coming from the equilibrium at -infinity"


class ExitRunner(Runner):
    """Monte Carlo exit times, the rate regression and the exit places."""

    def main_func(self, cfg):
        block = self.block
        seed = self.config.seed
        domain = ExitDomain(block.radius)
        z0 = self.config.initialState(cfg.basis, phase=block.kind == "wave")
        rows, records = estimateExitTimes(block.kind, block.eps_ladder, domain, cfg, block.n_paths, block.horizon,
                                          seed, z0, block.block_size)
        exitRecordsToCsv(self.artifactPath("exit_records.csv"), records, cfg.basis.N)
        result = {"rows": rows, "regression": None, "boundary_minimum": None}
        complete = sum(1 for row in rows if row["censored_rate"] == 0 and row["failed"] == 0)
        if complete >= 3:
            result["regression"] = rateRegression(rows, records, seed)
        else:
            logger.warning(f"only {complete} noise levels without censored or failed paths, "
                           f"the rate regression is skipped")
        if block.grid_audit:
            eps = max(block.eps_ladder)
            change = gridBiasAudit(block.kind, eps, domain, cfg, block.n_paths, block.horizon, seed, z0)
            result["grid_audit"] = {"eps": eps, "relative_change": change}
        if block.boundary_minimum:
            field, value = minBoundaryQuasipotential(domain, cfg.basis, cfg.nonlinearity, cfg.covariance,
                                                     block.kind, cfg.mu)
            result["boundary_minimum"] = {"value": value, "field": field.coeffs}
            self.writeTable("sandwich.csv", sandwichReport(records, value, block.eta))
        partition = BoundaryPartition(block.partition)
        self.writeTable("exit_places.csv", exitPlaceHistogram(records, partition, cfg.basis.N))
        return rows, result

    @staticmethod
    def getName():
        return "exit"

    @staticmethod
    def getAnchor():
        return "ε log E τ tends to the minimum of the quasi-potential on the boundary as the noise vanishes"


class SinVarianceRunner(Runner):
    """Variance of the oscillating integral ∫ sin(s/μ) dB(s)."""

    def before(self):
        self.state.setStageState("build", True)
        return {"cfg": None}

    def main_func(self, cfg):
        block = self.block
        rows = sinOscillationVariance(block.mu_ladder, block.t, block.n_paths, self.config.seed, block.cells)
        return rows, {"rows": rows}

    @staticmethod
    def getName():
        return "sin-variance"

    @staticmethod
    def getAnchor():
        return "∫ sin(s/μ) dB(s) keeps variance t/2 as μ goes to 0, so the magnetic limit needs friction"


def installRunners():
    """Create a dictionary of the implemented experiment runners"""
    return {sub_clz.getName(): sub_clz for sub_clz in Runner.__subclasses__()}
