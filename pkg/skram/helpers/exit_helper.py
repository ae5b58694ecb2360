import numpy as np
from loguru import logger

from skram.helpers.action_helper import actionGradient, minimizeAction
from skram.helpers.solver_helper import initialArray, stepperFor, systemFor
from skram.models.covariance_spec import lambdasOf
from skram.models.exit_domain import ExitRecord
from skram.models.noise_stream import NoiseStream
from skram.models.spectral_basis import ModeField, PhaseState
from skram.utils.run_report import ConfigurationError
from skram.utils.skram_config import SkramConfig
from skram.utils.thread_manager import PathPool
from skram.utils.utils import bootstrapInterval, writeCsv


def _defaultStart(kind, cfg):
    zero = ModeField.zeros(cfg.basis)
    return PhaseState(zero) if kind == "wave" else zero


def deterministicPrecheck(kind, domain, cfg, z0, horizon):
    """ Run the noiseless flow from z₀ and raise if it leaves the domain before the horizon.

        The flow is stepped on the solver grid and stops early once it is at rest.

        Parameters
        ----------
        kind: str
            ``wave`` or ``heat``.
        domain: ExitDomain
        cfg: SolverConfig
        z0: ModeField or PhaseState
        horizon: float

        Returns
        -------
        float:
            the largest |u(t)|_H along the noiseless flow.
    """
    position = z0.position if isinstance(z0, PhaseState) else z0
    if not domain.contains(position.coeffs):
        raise ConfigurationError(f"initial position with norm {position.norm():.4g} is not inside {domain!r}")
    flowCfg = cfg.copy(noiseScale=0.0, T=horizon, strict=True)
    system = systemFor(kind, flowCfg)
    stepper = stepperFor(flowCfg, [system])
    stream = NoiseStream(0, 0)
    x = initialArray(system, flowCfg, z0)
    largest = float(system.positionNorm(x)[0])
    for n in range(flowCfg.nSteps()):
        (following,), _, bad = stepper.step([x], n, stream)
        norm = float(system.positionNorm(following)[0])
        if bad[0] or norm >= domain.radius:
            raise ConfigurationError(f"the noiseless flow from the initial state leaves {domain!r} "
                                     f"at t={(n + 1) * flowCfg.h:.6g}")
        largest = max(largest, norm)
        # at rest
        if np.max(np.abs(following - x)) <= 1e-14 * (1.0 + np.max(np.abs(x))):
            break
        x = following
    return largest


def _exitBlock(kind, eps, domain, cfg, z0, horizon, seed, block, paths):
    """First exits of one block of paths driven by stream ``block``."""
    runCfg = cfg.copy(noiseScale=np.sqrt(eps) * cfg.noiseScale, T=horizon, strict=False)
    system = systemFor(kind, runCfg)
    stepper = stepperFor(runCfg, [system])
    stream = NoiseStream(seed, block)
    x = initialArray(system, runCfg, z0, len(paths))
    P = x.shape[0]
    tau = np.full(P, np.nan)
    fields = np.full((P, cfg.basis.N), np.nan)
    done = np.zeros(P, dtype=bool)
    failed = np.zeros(P, dtype=bool)
    for n in range(runCfg.nSteps()):
        (x,), _, bad = stepper.step([x], n, stream)
        with np.errstate(invalid="ignore"):
            norms = system.positionNorm(x)
            hit = ~done & ((norms >= domain.radius) | bad)
        if np.any(hit):
            tau[hit] = (n + 1) * runCfg.h
            fields[hit] = system.positions(x)[hit][..., 0]
            failed |= hit & bad
            done |= hit
            if np.all(done):
                break
    if np.any(failed):
        logger.warning(f"eps={eps} block {block}: {int(failed.sum())} paths blew up before leaving the domain")
    records = []
    for j, pathId in enumerate(paths):
        if failed[j]:
            records.append(ExitRecord(eps, pathId, tau[j], None, False, failed=True))
        elif done[j]:
            overshoot = float(np.linalg.norm(fields[j]) - domain.radius)
            records.append(ExitRecord(eps, pathId, tau[j], fields[j], False, overshoot))
        else:
            records.append(ExitRecord(eps, pathId, horizon, None, True))
    return records


def exitStatistics(records, seed=0):
    """ Mean and median exit time of the genuine exits with a bootstrap interval of the mean.

        Censored and failed paths are counted but do not enter the exit time statistics.

        Parameters
        ----------
        records: list[ExitRecord]
            records of one noise level.

        Returns
        -------
        dict
    """
    taus = np.array([r.tau for r in records if r.exited])
    censored = sum(r.censored for r in records)
    nan = float("nan")
    row = {"eps": records[0].eps, "n_paths": len(records), "n_exits": int(taus.size),
           "censored_rate": censored / len(records), "failed": sum(r.failed for r in records), "mean_tau": nan,
           "median_tau": nan, "ci_low": nan, "ci_high": nan}
    if taus.size:
        low, high = bootstrapInterval(taus, np.mean, SkramConfig.bootstrap_resamples, seed)
        row.update({"mean_tau": float(np.mean(taus)), "median_tau": float(np.median(taus)), "ci_low": low,
                    "ci_high": high})
    return row


def estimateExitTimes(kind, epsLadder, domain, cfg, nPaths, horizon, seed, z0=None, blockSize=None):
    """ Monte Carlo first exit times of the small noise wave or heat equation from an H-ball.

        The noise of level ε is the configured noise scaled by √ε. Path j of every level is driven by the
        same stream rows, so levels are seed matched. Exits are detected on the time grid.

        Parameters
        ----------
        kind: str
            ``wave`` or ``heat``.
        epsLadder: list[float]
            noise levels.
        domain: ExitDomain
        cfg: SolverConfig
            configuration at ε = 1; ``T`` is replaced by the horizon.
        nPaths: int
        horizon: float
            censoring time.
        seed: int
        z0: ModeField or PhaseState
            initial state, defaults to zero.
        blockSize: int
            paths per stream block, defaults to all paths in one block.

        Returns
        -------
        (list[dict], list[ExitRecord]):
            one statistics row per ε and every exit record.
    """
    if kind not in ("wave", "heat"):
        raise ConfigurationError(f"exit experiments run the wave or the heat equation, got {kind!r}")
    if any(not eps > 0 for eps in epsLadder):
        raise ConfigurationError("noise levels must be positive")
    z0 = _defaultStart(kind, cfg) if z0 is None else z0
    deterministicPrecheck(kind, domain, cfg, z0, horizon)
    blockSize = nPaths if blockSize is None else int(blockSize)
    blocks = [list(range(start, min(start + blockSize, nPaths))) for start in range(0, nPaths, blockSize)]
    cells = [(eps, b, paths) for eps in epsLadder for b, paths in enumerate(blocks)]

    def cell(item):
        eps, b, paths = item
        return _exitBlock(kind, eps, domain, cfg, z0, horizon, seed, b, paths)

    results = PathPool("exit").map(cell, cells)
    lambdas = cfg.lambdas()
    rows, records = [], []
    for i, eps in enumerate(epsLadder):
        level = [record for result in results[i * len(blocks):(i + 1) * len(blocks)] for record in result]
        records.extend(level)
        row = exitStatistics(level, seed)
        bound = float(np.sqrt(cfg.h * eps * np.sum(lambdas ** 2)))
        overshoots = np.array([r.overshoot for r in level if r.exited])
        row["overshoot_max"] = float(np.max(overshoots)) if overshoots.size else 0.0
        row["overshoot_bound"] = bound
        if overshoots.size and row["overshoot_max"] > 3.0 * bound:
            logger.warning(f"exit overshoot {row['overshoot_max']:.3g} exceeds 3 × {bound:.3g} at eps={eps}, "
                           f"the step size is too coarse")
        if row["censored_rate"] > 0:
            logger.info(f"eps={eps}: {row['censored_rate']:.1%} of the paths did not exit before t={horizon}")
        logger.info(f"exit eps={eps}: mean tau {row['mean_tau']:.6g}, median {row['median_tau']:.6g}")
        rows.append(row)
    return rows, records


def rateRegression(table, records=None, seed=0):
    """ Linear fit of ε·log E τ against ε, extrapolated to ε = 0.

        Parameters
        ----------
        table: list[dict]
            rows with ``eps``, ``mean_tau`` and ``censored_rate``; levels with censored or failed paths are
            left out.
        records: list[ExitRecord]
            exit records behind the table; enables a path bootstrap interval of the limit.
        seed: int

        Returns
        -------
        dict:
            ``limit`` (intercept), ``slope``, ``ci_low``, ``ci_high`` and the levels used.
    """
    rows = [row for row in table
            if row["censored_rate"] == 0 and row.get("failed", 0) == 0 and np.isfinite(row["mean_tau"])]
    if len(rows) < 3:
        raise ConfigurationError(f"the rate regression needs at least 3 uncensored noise levels, got {len(rows)}")
    eps = np.array([row["eps"] for row in rows])
    y = eps * np.log([row["mean_tau"] for row in rows])
    slope, limit = np.polyfit(eps, y, 1)
    result = {"limit": float(limit), "slope": float(slope), "eps": eps.tolist(), "y": y.tolist(),
              "ci_low": float("nan"), "ci_high": float("nan")}
    if records:
        taus = [np.array([r.tau for r in records if r.eps == e and r.exited]) for e in eps]
        rng = np.random.default_rng(seed)
        limits = []
        for _ in range(SkramConfig.bootstrap_resamples):
            means = [np.mean(t[rng.integers(0, t.size, t.size)]) for t in taus]
            limits.append(np.polyfit(eps, eps * np.log(means), 1)[1])
        result["ci_low"], result["ci_high"] = (float(v) for v in np.percentile(limits, [2.5, 97.5]))
    return result


def _sphereStep(func, grad, u0, radius, maxIterations=10000, tol=1e-10):
    """Projected gradient descent with retraction on the sphere |u| = radius and Armijo backtracking."""
    u = radius * u0 / np.linalg.norm(u0)
    value = func(u)
    step = 1.0
    for _ in range(maxIterations):
        g = grad(u)
        tangent = g - (g @ u) * u / radius ** 2
        norm = float(np.linalg.norm(tangent))
        if norm < tol * (1.0 + abs(value)):
            break
        while step > 1e-16:
            trial = u - step * tangent
            trial *= radius / np.linalg.norm(trial)
            trialValue = func(trial)
            if trialValue <= value - 1e-4 * step * norm * norm:
                break
            step *= 0.5
        if step <= 1e-16:
            break
        u, value = trial, trialValue
        step = min(1.0, 2.0 * step)
    return u, value


def minBoundaryQuasipotential(domain, basis, nonlinearity, covariance, kind="heat", mu=None, T=12.0, M=400,
                              maxIterations=50):
    """ Minimum of the quasi-potential on the sphere |u|_H = r.

        Gradient drifts use the explicit quasi-potential Σ α_k u_k²/λ_k² + 2F(u), which is also the value of
        the wave quasi-potential at zero velocity. Other drifts evaluate the quasi-potential by the action
        minimizer and move the endpoint along the sphere with the endpoint gradient of the minimal action.

        Parameters
        ----------
        domain: ExitDomain
        basis: SpectralBasis
        nonlinearity: NonlinearityInterface
        covariance: CovarianceSpec or np.ndarray
        kind: str
            ``heat`` or ``wave``.
        mu: float
            mass of the wave quasi-potential.
        T, M:
            grid of the action minimizations.
        maxIterations: int
            iterations of the outer descent for non-gradient drifts.

        Returns
        -------
        (ModeField, float):
            the minimizing boundary field and the value.
    """
    lambdas = lambdasOf(covariance, basis)
    alphas = basis.alphas
    r = domain.radius
    ratio = np.where(lambdas > 0, alphas / np.where(lambdas > 0, lambdas, 1.0) ** 2, np.inf)
    start = np.zeros(basis.N)
    start[int(np.argmin(ratio))] = 1.0

    if nonlinearity.isGradient:
        inv = np.where(lambdas > 0, 1.0 / np.where(lambdas > 0, lambdas, 1.0) ** 2, 0.0)
        gradientOf = getattr(nonlinearity, "gradient", lambda u: np.zeros_like(u))

        def func(u):
            return float(np.sum(alphas * u * u * inv) + 2.0 * nonlinearity.potential(u))

        def grad(u):
            return 2.0 * alphas * u * inv + 2.0 * gradientOf(u)

        best = None
        for k in range(basis.N):
            for sign in (1.0, -1.0):
                guess = np.zeros(basis.N)
                guess[k] = sign
                candidate = _sphereStep(func, grad, guess + 1e-3 * start, r)
                if best is None or candidate[1] < best[1]:
                    best = candidate
        return ModeField(basis, best[0]), best[1]

    mode = "wave" if kind == "wave" else "heat"

    def func(u):
        return minimizeAction(u, basis, nonlinearity, covariance, mode, mu=mu, T=T, M=M).value

    def grad(u):
        result = minimizeAction(u, basis, nonlinearity, covariance, mode, mu=mu, T=T, M=M)
        return actionGradient(result.minimizer, mu if mode == "wave" else 0.0, nonlinearity, covariance)[-1]

    u, value = _sphereStep(func, grad, start, r, maxIterations=maxIterations, tol=SkramConfig.action_tolerance)
    return ModeField(basis, u), value


def exitPlaceHistogram(records, partition, N):
    """ Frequencies of the exit places per noise level and boundary cell.

        Parameters
        ----------
        records: list[ExitRecord]
        partition: BoundaryPartition
        N: int
            number of modes.

        Returns
        -------
        list[dict]:
            rows (eps, cell, count, frequency, ci_low, ci_high) with normal approximation intervals.
    """
    rows = []
    for eps in sorted({r.eps for r in records}, reverse=True):
        exits = [r for r in records if r.eps == eps and r.exited]
        counts = {cell: 0 for cell in partition.cells(N)}
        for record in exits:
            counts[partition.cellOf(record.exitField)] += 1
        total = max(1, len(exits))
        for cell, count in counts.items():
            p = count / total
            half = 1.96 * np.sqrt(p * (1.0 - p) / total)
            rows.append({"eps": eps, "cell": cell, "count": count, "frequency": p,
                         "ci_low": max(0.0, p - half), "ci_high": min(1.0, p + half)})
    return rows


def sandwichReport(records, value, eta):
    """ Fraction of the paths whose exit time lies in [e^{(V−η)/ε}, e^{(V+η)/ε}], per noise level.

        Censored paths whose horizon is below the upper bound cannot be classified and are counted as
        undetermined.
    """
    rows = []
    for eps in sorted({r.eps for r in records}, reverse=True):
        level = [r for r in records if r.eps == eps]
        lower, upper = np.exp((value - eta) / eps), np.exp((value + eta) / eps)
        inside = sum(1 for r in level if r.exited and lower <= r.tau <= upper)
        undetermined = sum(1 for r in level if r.censored and r.tau < upper)
        failed = sum(1 for r in level if r.failed)
        rows.append({"eps": eps, "lower": lower, "upper": upper, "inside_fraction": inside / len(level),
                     "undetermined_fraction": undetermined / len(level), "failed_fraction": failed / len(level)})
    return rows


def gridBiasAudit(kind, eps, domain, cfg, nPaths, horizon, seed, z0=None):
    """Relative change of ε·log E τ when the step is halved at one noise level."""
    coarse, _ = estimateExitTimes(kind, [eps], domain, cfg, nPaths, horizon, seed, z0)
    fine, _ = estimateExitTimes(kind, [eps], domain, cfg.copy(h=cfg.h / 2.0), nPaths, horizon, seed, z0)
    a, b = eps * np.log(coarse[0]["mean_tau"]), eps * np.log(fine[0]["mean_tau"])
    change = abs(a - b) / abs(b)
    if change > 0.03:
        logger.warning(f"halving the step moves eps·log E tau by {change:.1%} at eps={eps}")
    return change


def exitRecordsToCsv(path, records, N):
    header = ["eps", "path_id", "tau", "censored", "failed"] + [f"exit_mode_{k}" for k in range(1, N + 1)]
    rows = []
    for r in records:
        field = r.exitField if r.exitField is not None else np.full(N, np.nan)
        rows.append([r.eps, r.pathId, r.tau, r.censored, r.failed] + [float(v) for v in field])
    writeCsv(path, header, rows)
