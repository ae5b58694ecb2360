import numpy as np
from loguru import logger

from skram.helpers.solver_helper import simulate
from skram.models.covariance_spec import lambdasOf
from skram.models.noise_stream import NoiseStream
from skram.models.nonlinearity import ZeroNonlinearity
from skram.models.spectral_basis import ModeField, PhaseState
from skram.models.stationary_spec import StationarySpec
from skram.utils.hypotheses import HypothesisChecker
from skram.utils.run_report import ConfigurationError, InvalidParameterError
from skram.utils.skram_config import SkramConfig
from skram.utils.utils import batchMeansError, integratedAutocorrTime, writeCsv


def exactModeStationaryCov(mu, alpha, lam):
    """ Stationary variances of one mode of the linear damped wave equation.

        Parameters
        ----------
        mu, alpha: float
            mass and eigenvalue, positive.
        lam: float
            noise intensity, nonnegative.

        Returns
        -------
        (float, float):
            position variance λ²/(2α) and velocity variance λ²/(2μ).
    """
    if not (mu > 0 and alpha > 0) or lam < 0:
        raise InvalidParameterError(f"need mu > 0, alpha > 0 and lambda ≥ 0, got {mu}, {alpha}, {lam}")
    return lam * lam / (2.0 * alpha), lam * lam / (2.0 * mu)


def _moments(series):
    """Mean, variance and their batch means standard errors of a (K, P, N) series pooled over paths."""
    mean = np.mean(series, axis=(0, 1))
    square = np.abs(series - mean) ** 2
    var = np.mean(square, axis=(0, 1))
    seMean = batchMeansError(np.mean(series, axis=1).real)
    seVar = batchMeansError(np.mean(square, axis=1))
    return mean, var, seMean, seVar


def empiricalLongRunMoments(trajectory, burnInFraction=0.2):
    """ Time averaged per mode moments of a trajectory after burn-in, pooled over its paths.

        Standard errors come from batch means along time; the effective sample size divides the number of
        pooled samples by the integrated autocorrelation time of each mode.

        Parameters
        ----------
        trajectory: Trajectory
        burnInFraction: float
            fraction of the recorded states discarded, in [0, 1).

        Returns
        -------
        dict:
            ``mean_u``, ``var_u``, ``se_mean_u``, ``se_var_u``, ``ess`` and, for second order systems, the
            same statistics of the velocity.
    """
    if not 0.0 <= burnInFraction < 1.0:
        raise ConfigurationError(f"burn-in fraction must lie in [0, 1), got {burnInFraction}")
    start = int(np.ceil(burnInFraction * len(trajectory)))
    if len(trajectory) - start < 4:
        raise ConfigurationError("trajectory is too short for the requested burn-in")
    keep = ~trajectory.failed
    u = trajectory.positions()[start:, keep]
    meanU, varU, seMeanU, seVarU = _moments(u)
    samples = u.shape[0] * u.shape[1]
    ess = np.array([samples / integratedAutocorrTime(np.real(u[..., k])) for k in range(u.shape[-1])])
    if np.min(ess) < SkramConfig.ess_warning:
        logger.warning(f"effective sample size {np.min(ess):.1f} is below {SkramConfig.ess_warning}")
    result = {"mean_u": meanU, "var_u": varU, "se_mean_u": seMeanU, "se_var_u": seVarU, "ess": ess,
              "samples": samples}
    velocities = trajectory.velocities()
    if velocities is not None:
        meanV, varV, seMeanV, seVarV = _moments(velocities[start:, keep])
        result.update({"mean_v": meanV, "var_v": varV, "se_mean_v": seMeanV, "se_var_v": seVarV})
    return result


def gaussianReferenceSample(covariance, basis, nSamples, seed):
    """Exact draws from N(0, (−Δ)⁻¹Q²/2), shape (nSamples, N)."""
    sd = lambdasOf(covariance, basis) / np.sqrt(2.0 * basis.alphas)
    return NoiseStream(seed, 0).normals(0, (nSamples, basis.N)) * sd


def _potentialOf(F):
    if callable(F) and not hasattr(F, "potential"):
        return F
    HypothesisChecker(F.flags()).requireFor(["stationary-boltzmann"], "boltzmann sampling")
    return F.potential


def boltzmannMcmcSample(F, covariance, basis, nSamples, seed, step=None, thin=None, burnIn=None, chains=4):
    """ Preconditioned Crank-Nicolson sampler of Z⁻¹e^{−2F(u)} N(0, (−Δ)⁻¹Q²/2).

        The proposal u' = √(1 − s²)·u + s·ξ with ξ drawn from the Gaussian reference is reversible for the
        reference, so the acceptance probability is min(1, e^{−2(F(u') − F(u))}). The step s is retuned
        during burn-in only, halving it below 10% acceptance and doubling it (up to 1) above 90%.

        Parameters
        ----------
        F: NonlinearityInterface or callable
            gradient drift whose potential is used, or the potential itself acting on (C, N) arrays.
        covariance: CovarianceSpec or np.ndarray
        basis: SpectralBasis
        nSamples: int
            number of thinned samples returned, spread over the chains.
        seed: int
        step, thin, burnIn:
            proposal step, thinning and burn-in fraction; default to ``SkramConfig``.
        chains: int
            number of chains advanced together.

        Returns
        -------
        dict:
            ``samples`` (nSamples, N), ``acceptance`` after burn-in and the final ``step``.
    """
    potential = _potentialOf(F)
    step = SkramConfig.mcmc_step if step is None else float(step)
    thin = SkramConfig.mcmc_thin if thin is None else int(thin)
    burnIn = SkramConfig.mcmc_burn_in if burnIn is None else float(burnIn)
    if not 0.0 < step <= 1.0:
        raise ConfigurationError(f"proposal step must lie in (0, 1], got {step}")
    if thin < 1 or not 0.0 <= burnIn < 1.0:
        raise ConfigurationError(f"invalid thinning {thin} or burn-in {burnIn}")
    sd = lambdasOf(covariance, basis) / np.sqrt(2.0 * basis.alphas)
    stream = NoiseStream(seed, 0)
    kept = int(np.ceil(nSamples / chains))
    production = kept * thin
    burn = int(np.ceil(burnIn / (1.0 - burnIn) * production))
    window = 100

    u = stream.spawn(1).normals(0, (chains, basis.N)) * sd
    fu = potential(u)
    samples = []
    accepted = 0
    windowAccepted = 0
    for it in range(burn + production):
        xi = stream.normals(it, (chains, basis.N)) * sd
        proposal = np.sqrt(1.0 - step * step) * u + step * xi
        fp = potential(proposal)
        accept = np.log(stream.uniforms(it, chains)) < -2.0 * (fp - fu)
        u = np.where(accept[:, None], proposal, u)
        fu = np.where(accept, fp, fu)
        if it < burn:
            windowAccepted += int(np.count_nonzero(accept))
            if (it + 1) % window == 0:
                rate = windowAccepted / (window * chains)
                windowAccepted = 0
                if rate < 0.1:
                    step *= 0.5
                    logger.warning(f"pCN acceptance {rate:.2f} below 0.1, step reduced to {step:.4g}")
                elif rate > 0.9 and step < 1.0:
                    step = min(1.0, 2.0 * step)
                    logger.warning(f"pCN acceptance {rate:.2f} above 0.9, step increased to {step:.4g}")
            continue
        accepted += int(np.count_nonzero(accept))
        if (it - burn + 1) % thin == 0:
            samples.append(u.copy())
    # chains are interleaved sample by sample
    stacked = np.stack(samples, axis=0).reshape(-1, basis.N)[:nSamples] if samples else np.zeros((0, basis.N))
    acceptance = accepted / max(1, production * chains)
    logger.debug(f"pCN sampler: {stacked.shape[0]} samples, acceptance {acceptance:.3f}, step {step:.4g}")
    return {"samples": stacked, "acceptance": acceptance, "step": step}


def pcnKernel(u, uNew, step, variance, potential):
    """ Density of the accepted moves of the one mode pCN chain.

        Parameters
        ----------
        u, uNew: float or np.ndarray
            current and proposed value.
        step: float
        variance: float
            variance of the Gaussian reference.
        potential: callable
            F acting on arrays of values.

        Returns
        -------
        np.ndarray:
            q(u, u')·min(1, e^{−2(F(u') − F(u))}).
    """
    u = np.asarray(u, dtype=float)
    uNew = np.asarray(uNew, dtype=float)
    scale = step * step * variance
    q = np.exp(-(uNew - np.sqrt(1.0 - step * step) * u) ** 2 / (2.0 * scale)) / np.sqrt(2.0 * np.pi * scale)
    return q * np.minimum(1.0, np.exp(-2.0 * (potential(uNew) - potential(u))))


def boltzmannDensity(u, variance, potential):
    """Unnormalized one mode target e^{−2F(u)}·N(u; 0, variance)."""
    u = np.asarray(u, dtype=float)
    return np.exp(-2.0 * potential(u) - u * u / (2.0 * variance)) / np.sqrt(2.0 * np.pi * variance)


def _standardized(a, b, seA, seB):
    se = np.sqrt(seA ** 2 + seB ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(a - b) / se, np.where(np.abs(a - b) > 0, np.inf, 0.0))
    return z


def marginalMuIndependenceTest(muA, muB, cfg, T, seed, nPaths=32, burnIn=0.2, modes=4, recordEvery=10,
                               mcmcSamples=20000):
    """ Compare the stationary position marginals of the damped wave equation at two masses.

        The two runs use streams 0 and 1 of the master seed. For gradient drifts both runs are also compared
        with the pCN sampler of the Boltzmann measure. Non-gradient drifts are run without a comparison
        target.

        Parameters
        ----------
        muA, muB: float
            masses.
        cfg: SolverConfig
            shared configuration; ``mu`` and ``T`` are overridden.
        T: float
            horizon of the long runs.
        seed: int
        nPaths: int
            paths per run, pooled.
        burnIn: float
            discarded fraction of every run.
        modes: int
            number of leading modes compared.
        recordEvery: int
            recording stride of the long runs.
        mcmcSamples: int
            size of the Boltzmann reference sample.

        Returns
        -------
        dict:
            per mode ``rows``, the maximal standardized position discrepancy ``max_z``, the velocity variance
            ratios and, for gradient drifts, ``max_z_mcmc``. For gradient drifts the rows carry the exact
            velocity variances λ_k²/(2μ), and without drift also the exact position variance λ_k²/(2α_k).
    """
    modes = min(modes, cfg.basis.N)
    zero = PhaseState(ModeField.zeros(cfg.basis))
    moments = []
    for index, mu in enumerate((muA, muB)):
        runCfg = cfg.copy(mu=mu, T=T, recordEvery=max(1, int(recordEvery)), strict=False)
        trajectory = simulate(runCfg, zero, NoiseStream(seed, index), kind="wave", nPaths=nPaths)
        moments.append(empiricalLongRunMoments(trajectory, burnIn))
        logger.info(f"stationary run mu={mu} done, ess={np.min(moments[-1]['ess']):.0f}")
    specs = [StationarySpec(cfg.basis, cfg.lambdas(), mu) for mu in (muA, muB)]
    exactV = [spec.modeVariances()[1] for spec in specs]
    a, b = moments
    zVar = _standardized(a["var_u"], b["var_u"], a["se_var_u"], b["se_var_u"])[:modes]
    zMean = _standardized(a["mean_u"], b["mean_u"], a["se_mean_u"], b["se_mean_u"])[:modes]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (a["var_v"] / b["var_v"])[:modes]
    report = {
        "max_z": float(np.max(np.concatenate([zVar, zMean]))),
        "velocity_ratio": ratio,
        "expected_velocity_ratio": muB / muA,
        "rows": [],
        "max_z_mcmc": None,
    }
    reference = None
    nonlinearity = cfg.nonlinearity
    if nonlinearity.isGradient:
        if isinstance(nonlinearity, ZeroNonlinearity):
            draws = gaussianReferenceSample(cfg.covariance, cfg.basis, mcmcSamples, seed)
        else:
            draws = boltzmannMcmcSample(nonlinearity, cfg.covariance, cfg.basis, mcmcSamples, seed)["samples"]
        reference = (np.var(draws, axis=0), batchMeansError((draws - draws.mean(axis=0)) ** 2))
        zA = _standardized(a["var_u"], reference[0], a["se_var_u"], reference[1])[:modes]
        zB = _standardized(b["var_u"], reference[0], b["se_var_u"], reference[1])[:modes]
        report["max_z_mcmc"] = float(np.max(np.concatenate([zA, zB])))
        report["reference_samples"] = draws
    else:
        logger.info("non-gradient drift: the marginals are compared with each other only")
    for k in range(modes):
        row = {"mode": k + 1, "var_u_a": a["var_u"][k], "var_u_b": b["var_u"][k], "z_var": zVar[k],
               "var_v_a": a["var_v"][k], "var_v_b": b["var_v"][k], "velocity_ratio": ratio[k]}
        if nonlinearity.isGradient:
            row["var_v_exact_a"], row["var_v_exact_b"] = exactV[0][k], exactV[1][k]
        if isinstance(nonlinearity, ZeroNonlinearity):
            row["var_u_linear"] = specs[0].modeVariances()[0][k]
        if reference is not None:
            row["var_u_reference"] = reference[0][k]
        report["rows"].append(row)
    return report


def samplesToCsv(path, samples):
    """One row per sample, one column per mode coefficient."""
    samples = np.asarray(samples)
    writeCsv(path, [f"mode_{k}" for k in range(1, samples.shape[1] + 1)], samples.tolist())
