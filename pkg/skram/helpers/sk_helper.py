import numpy as np
from loguru import logger
from scipy.integrate import cumulative_trapezoid

from skram.helpers.mode_systems import HeatModeSystem, MagneticModeSystem, RotatedHeatModeSystem
from skram.helpers.solver_helper import simulateCoupled, simulateCoupledPair
from skram.models.covariance_spec import CovarianceSpec
from skram.models.noise_stream import NoiseStream
from skram.models.nonlinearity import KleinGordon, ModeLipschitz
from skram.models.spectral_basis import ModeField, PhaseState
from skram.utils.hypotheses import HypothesisChecker
from skram.utils.run_report import ConfigurationError
from skram.utils.skram_config import SkramConfig
from skram.utils.thread_manager import PathPool
from skram.utils.utils import bootstrapInterval, compositeGaussLegendre


def summarizeErrors(errors, seed=0):
    """ Median, 90th percentile, mean and bootstrap interval of the median over the finite entries.

        Parameters
        ----------
        errors: np.ndarray
            one error per path, NaN for failed paths.
        seed: int
            seed of the bootstrap.

        Returns
        -------
        dict
    """
    errors = np.asarray(errors, dtype=float)
    ok = errors[np.isfinite(errors)]
    failed = int(errors.size - ok.size)
    if ok.size == 0:
        nan = float("nan")
        return {"median": nan, "p90": nan, "mean": nan, "ci_low": nan, "ci_high": nan, "failed": failed}
    low, high = bootstrapInterval(ok, np.median, SkramConfig.bootstrap_resamples, seed)
    return {
        "median": float(np.median(ok)),
        "p90": float(np.percentile(ok, 90)),
        "mean": float(np.mean(ok)),
        "ci_low": low,
        "ci_high": high,
        "failed": failed,
    }


def _requireFlag(covariance, flag, context):
    if isinstance(covariance, CovarianceSpec):
        HypothesisChecker(covariance.flags()).require(flag, context)


def runSkConvergence(muLadder, cfg, nPaths, seed, z0=None):
    """ Small mass convergence table of the wave equation towards the heat equation.

        Every cell couples the wave equation at one mass with the heat equation on the same noise; the
        paths of every cell come from the same stream, so the ladder is seed matched.

        Parameters
        ----------
        muLadder: list
            decreasing masses; a None entry couples the heat equation with itself.
        cfg: SolverConfig
            shared configuration; its ``mu`` is ignored.
        nPaths: int
            number of matched paths.
        seed: int
            master seed.
        z0: PhaseState
            initial state, defaults to zero.

        Returns
        -------
        list[dict]:
            one row per mass with the statistics of sup_t |u^μ(t) − u(t)|_H.
    """
    if isinstance(cfg.nonlinearity, ModeLipschitz):
        raise ConfigurationError("the small mass table needs a Nemytskii, Klein-Gordon or gradient nonlinearity")
    _requireFlag(cfg.covariance, "holder_regularity", "sk-limit")
    if cfg.multiplicativeG is not None and isinstance(cfg.nonlinearity, KleinGordon):
        HypothesisChecker(cfg.multiplicativeG.flags()).requireFor(["klein-gordon-multiplicative"],
                                                                  "the multiplicative Klein-Gordon sk-limit")
    z0 = PhaseState(ModeField.zeros(cfg.basis)) if z0 is None else z0

    def cell(mu):
        stream = NoiseStream(seed, 0)
        base = cfg.copy(strict=False)
        if mu is None:
            heat = HeatModeSystem(cfg.basis.alphas)
            start = np.repeat(heat.toArray(z0.position)[None], nPaths, axis=0)
            _, errors = simulateCoupled(base, [heat, heat], [start, start], stream)
        else:
            waveCfg = base.copy(mu=mu)
            _, _, errors = simulateCoupledPair(waveCfg, base, z0, stream, nPaths=nPaths)
        row = {"mu": float("nan") if mu is None else float(mu)}
        row.update(summarizeErrors(errors, seed))
        logger.info(f"sk-limit mu={mu} median={row['median']:.6g} failed={row['failed']}")
        return row

    return PathPool("sk-limit").map(cell, muLadder)


def _expWeighted(values, t, mu):
    """Integrals ∫₀^{t_k} e^{−(t_k−s)/μ} f(s) ds of the piecewise linear interpolant of f on the grid t."""
    h = np.diff(t)
    decay = np.exp(-h / mu)
    lost = -np.expm1(-h / mu)
    right = mu - mu * mu * lost / h
    left = mu * lost - right
    out = np.zeros_like(values)
    for k in range(1, t.size):
        out[k] = decay[k - 1] * out[k - 1] + left[k - 1] * values[k - 1] + right[k - 1] * values[k]
    return out


def residualDiagnostic(trajectory, testFunction, mu=None):
    """ Integration by parts remainder of the wave equation tested against φ, term by term.

        Along a solution of μu'' + u' = Δu + B(u) + ∂_t N the pairing ⟨u(t), φ(t)⟩ equals
        ⟨u₀, φ(0)⟩ + ∫₀^t ⟨u, ∂φ/∂t + Δφ⟩ + ∫₀^t ⟨B(u), φ⟩ + ∫₀^t ⟨φ, dN⟩ + R(t), with

        R(t) = μ(1 − e^{−t/μ})⟨v₀, φ(0)⟩ − ∫₀^t e^{−(t−s)/μ} M(s) ds
               − ∫₀^t e^{−(t−s)/μ} [⟨u₀, φ_t(0)⟩ − ⟨u(s), φ_t(s)⟩ + ∫₀^s ⟨u, φ_tt⟩ dr] ds
               − ∫₀^t e^{−(t−s)/μ} ⟨φ(s), dN(s)⟩

        and M = ⟨u, Δφ⟩ + ⟨B(u), φ⟩. Every term is reported. The deterministic weighted integrals integrate
        the trapezoid interpolant exactly against the exponential; the stochastic one weights each stored
        increment by the mean of the exponential over its step. ``defect`` is the left hand side minus the
        right hand side without R, computed independently with the trapezoid rule, and agrees with
        ``residual`` up to the time discretization.

        Parameters
        ----------
        trajectory: Trajectory
            wave trajectory recorded at every step with its noise increments.
        testFunction: PolynomialTestFunction
        mu: float
            mass, only checked against the trajectory's configuration.

        Returns
        -------
        dict:
            ``times`` (K,) and the (K, P) arrays ``residual``, ``initial``, ``drift``, ``time``, ``noise``
            and ``defect``.
    """
    cfg = trajectory.config
    if trajectory.system.getName() != "wave":
        raise ConfigurationError("the residual diagnostic needs a wave trajectory")
    if trajectory.noise is None or cfg.recordEvery != 1:
        raise ConfigurationError("the residual diagnostic needs every step and its noise increments recorded")
    if mu is not None and cfg.mu != mu:
        raise ConfigurationError(f"trajectory was computed with mu={cfg.mu}, not {mu}")
    cfg.basis.checkSame(testFunction.basis, "test function")
    mu = cfg.mu
    t = trajectory.times
    u = trajectory.positions()
    v = trajectory.velocities()
    phi = testFunction.values(t)
    phiT = testFunction.derivative(t)
    phiTT = testFunction.derivative(t, order=2)

    pairing = np.einsum("kpn,kn->kp", u, phi)
    forcing = np.einsum("kpn,kn->kp", cfg.nonlinearity.apply(u), phi)
    M = np.einsum("kpn,kn->kp", u, testFunction.laplacian(t)) + forcing
    slope = np.einsum("kpn,kn->kp", u, phiT)
    curvature = np.einsum("kpn,kn->kp", u, phiTT)
    kicks = np.einsum("kpn,kn->kp", trajectory.noise[..., 0], phi[:-1])

    def deterministic(grid):
        tg = t[grid]
        bracket = slope[grid][0] - slope[grid] + cumulative_trapezoid(curvature[grid], tg, axis=0, initial=0.0)
        return -_expWeighted(M[grid], tg, mu), -_expWeighted(bracket, tg, mu)

    drift, time = deterministic(slice(None))
    initial = -mu * np.expm1(-t / mu)[:, None] * np.einsum("pn,n->p", v[0], phi[0])[None, :]
    noise = np.zeros_like(pairing)
    h = np.diff(t)
    decay = np.exp(-h / mu)
    mean = -mu * np.expm1(-h / mu) / h
    for k in range(1, t.size):
        noise[k] = decay[k - 1] * noise[k - 1] + mean[k - 1] * kicks[k - 1]
    noise = -noise
    residual = initial + drift + time + noise

    stochastic = np.concatenate([np.zeros((1, u.shape[1])), np.cumsum(kicks, axis=0)])
    defect = pairing - pairing[0] - cumulative_trapezoid(slope + M, t, axis=0, initial=0.0) - stochastic

    if t.size >= 5:
        coarseDrift, coarseTime = deterministic(slice(None, None, 2))
        change = np.max(np.abs(coarseDrift + coarseTime - drift[::2] - time[::2]))
        scale = np.max(np.abs(residual))
        if change > 0.05 * scale and change > 1e-12:
            logger.warning(f"residual changes by {change:.3g} when the time grid is halved, the grid is too coarse")
    return {"times": t, "residual": residual, "initial": initial, "drift": drift, "time": time, "noise": noise,
            "defect": defect}


def sinIntegralVariance(mu, t):
    """Variance ∫₀^t sin²(s/μ) ds of ∫₀^t sin(s/μ) dB(s), by composite Gauss-Legendre quadrature."""
    if not (mu > 0 and t > 0):
        raise ConfigurationError(f"need mu > 0 and t > 0, got mu={mu}, t={t}")
    panels = max(1, int(np.ceil(t / (np.pi * mu))))
    return float(compositeGaussLegendre(lambda s: np.sin(s / mu) ** 2, 0.0, t, panels=panels))


def sinOscillationVariance(muLadder, t, nPaths, seed, cells=64):
    """ Variance of ∫₀^t sin(s/μ) dB(s) along a mass ladder.

        The Monte Carlo estimate sums independent exact Gaussians, one per time cell, whose variances are
        the integrals of sin² over the cells; its limit t/2 shows that the oscillating integral does not
        vanish with μ.

        Parameters
        ----------
        muLadder: list[float]
        t: float
            horizon, positive.
        nPaths: int
        seed: int
        cells: int
            number of time cells of the Monte Carlo sum.

        Returns
        -------
        list[dict]:
            rows with μ, the quadrature variance, the Monte Carlo variance and its standard error.
    """
    edges = np.linspace(0.0, t, cells + 1)
    rows = []
    for i, mu in enumerate(muLadder):
        exact = sinIntegralVariance(mu, t)
        cellVar = np.diff(edges) / 2.0 - mu * np.diff(np.sin(2.0 * edges / mu)) / 4.0
        z = NoiseStream(seed, 0).normals(i, (nPaths, cells))
        samples = z @ np.sqrt(np.maximum(cellVar, 0.0))
        mc = float(np.mean(samples ** 2))
        se = float(np.std(samples ** 2, ddof=1) / np.sqrt(nPaths))
        rows.append({"mu": float(mu), "exact": exact, "mc": mc, "se": se, "limit": t / 2.0})
        logger.info(f"sin-variance mu={mu} exact={exact:.6g} mc={mc:.6g}")
    return rows


def _magneticStart(cfg, z0):
    if z0 is None:
        return PhaseState(ModeField.zeros(cfg.basis))
    return z0


def runMagneticDoubleLimit(muLadder, epsLadder, cfg, nPaths, seed, z0=None, epsLimit=True):
    """ Error matrix of the magnetic system towards its first order limit, and the ε→0 column.

        For each friction ε and mass μ the cell couples the magnetic system with the rotated heat
        equation of the same ε. The column couples the rotated heat equation at ε with the one at ε = 0,
        which needs a trace class covariance.

        Parameters
        ----------
        muLadder: list[float]
        epsLadder: list[float]
            frictions; 0 gives the row on which the small mass limit fails.
        cfg: SolverConfig
            configuration on a two component basis.
        nPaths: int
        seed: int
        z0: PhaseState
            initial state, defaults to zero.
        epsLimit: bool
            also compute the ε→0 column.

        Returns
        -------
        dict:
            ``matrix`` rows (eps, mu, statistics) and ``eps_column`` rows (eps, statistics).
    """
    if cfg.basis.vectorDim != 2:
        raise ConfigurationError("the magnetic system needs a basis with vector_dim = 2")
    _requireFlag(cfg.covariance, "finite_energy", "magnetic")
    if epsLimit:
        _requireFlag(cfg.covariance, "trace_class", "magnetic eps->0 column")
    z0 = _magneticStart(cfg, z0)
    alphas = cfg.basis.alphas
    cells = [(eps, mu) for eps in epsLadder for mu in muLadder]

    def matrixCell(item):
        eps, mu = item
        cellCfg = cfg.copy(mu=mu, eps=eps, strict=False)
        systems = [MagneticModeSystem(alphas, mu, eps), RotatedHeatModeSystem(alphas, eps)]
        start = np.repeat(systems[0].toArray(z0)[None], nPaths, axis=0)
        _, errors = simulateCoupled(cellCfg, systems, [start, start[..., :2]], NoiseStream(seed, 0))
        row = {"eps": float(eps), "mu": float(mu)}
        row.update(summarizeErrors(errors, seed))
        logger.info(f"magnetic eps={eps} mu={mu} median={row['median']:.6g}")
        return row

    result = {"matrix": PathPool("magnetic").map(matrixCell, cells), "eps_column": []}
    if not epsLimit:
        return result

    def columnCell(eps):
        cellCfg = cfg.copy(eps=eps, strict=False)
        systems = [RotatedHeatModeSystem(alphas, eps), RotatedHeatModeSystem(alphas, 0.0)]
        start = np.repeat(systems[0].toArray(z0)[None], nPaths, axis=0)
        _, errors = simulateCoupled(cellCfg, systems, [start, start], NoiseStream(seed, 0))
        row = {"eps": float(eps)}
        row.update(summarizeErrors(errors, seed))
        return row

    result["eps_column"] = PathPool("magnetic-eps").map(columnCell, [eps for eps in epsLadder if eps > 0])
    return result


def holderIncrementDiagnostic(trajectory, lags):
    """ Mean square increments E|u(t + τ) − u(t)|²_H and their log-log slope.

        Parameters
        ----------
        trajectory: Trajectory
        lags: list[int]
            lags in recorded samples, positive.

        Returns
        -------
        dict:
            ``tau``, ``mean_square`` and the fitted ``exponent`` of the mean square in τ.
    """
    u = trajectory.positions()
    dt = trajectory.times[1] - trajectory.times[0]
    lags = [int(lag) for lag in lags if 0 < int(lag) < u.shape[0]]
    if len(lags) < 2:
        raise ConfigurationError("the increment diagnostic needs at least two lags shorter than the trajectory")
    taus = np.array([lag * dt for lag in lags])
    meanSquare = np.array([np.nanmean(np.sum(np.abs(u[lag:] - u[:-lag]) ** 2, axis=-1)) for lag in lags])
    positive = meanSquare > 0
    exponent = float("nan")
    if np.count_nonzero(positive) >= 2:
        exponent = float(np.polyfit(np.log(taus[positive]), np.log(meanSquare[positive]), 1)[0])
    return {"tau": taus, "mean_square": meanSquare, "exponent": exponent}
