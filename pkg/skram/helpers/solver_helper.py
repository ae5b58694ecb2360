import numpy as np
from loguru import logger

from skram.helpers.mode_systems import makeSystem
from skram.helpers.noise_helper import crossModeStepCovariance, jointStepCovariance, semidefiniteCholesky
from skram.models.nonlinearity import ZeroNonlinearity
from skram.models.solver_config import Trajectory
from skram.models.spectral_basis import ModeField, PhaseState
from skram.utils.run_report import BlowUpError, ConfigurationError
from skram.utils.skram_config import SkramConfig


class ModeStepper():
    """Exponential Euler stepper for one or several mode systems driven by the same Brownian motions.

    One step maps x to Φ(h)(x − x*) + x* + ξ, where x* is the equilibrium under the drift frozen at the
    left endpoint and ξ is the exact stochastic convolution of the step. The noise of all systems is drawn
    jointly from the per mode covariance of (ΔW, ξ_1, ..., ξ_m); systems with identical dynamics share
    their rows, so identical systems started from identical states stay identical.

    Multiplicative noise freezes G(u) at the left endpoint. Each Brownian motion β_j then drives every
    mode, and its convolutions are drawn from the cross mode covariance, so ξ has the exact joint law of
    ∫Φ(h − s)G dW(s) given the frozen G.
    """

    def __init__(self, cfg, systems):
        """Initialize function.

            Parameters
            ----------
            cfg: SolverConfig
            systems: list[ModeSystemInterface]
                systems on ``cfg.basis`` sharing one noise dimension.
        """
        self.cfg = cfg
        self.systems = list(systems)
        self.unique = []
        self.index = []
        for system in self.systems:
            match = next((j for j, known in enumerate(self.unique) if known.sameAs(system)), None)
            if match is None:
                self.unique.append(system)
                match = len(self.unique) - 1
            self.index.append(match)

        self.noiseDim = self.systems[0].noiseDim
        self.fineStep = cfg.h / cfg.refine
        self.lambdas = cfg.lambdas()
        self.silent = cfg.multiplicativeG is None and not np.any(self.lambdas)
        self.coarse = [system.propagator(cfg.h) for system in self.unique]
        self.fine = [system.propagator(self.fineStep) for system in self.unique]
        self.factor = semidefiniteCholesky(jointStepCovariance(self.unique, self.fineStep))
        self.rows = []
        offset = self.noiseDim
        for system in self.unique:
            self.rows.append(slice(offset, offset + system.stateDim))
            offset += system.stateDim
        self.width = offset
        self.crossFactor = None
        if cfg.multiplicativeG is not None:
            if any(len(s.positionSlots) != 1 for s in self.systems):
                raise ConfigurationError("multiplicative noise needs scalar position fields")
            cov = crossModeStepCovariance(self.unique, self.fineStep)
            self.crossFactor = semidefiniteCholesky(cov[None])[0]
        logger.debug(f"ModeStepper<{'+'.join(s.getName() for s in self.systems)}> h={cfg.h} "
                     f"refine={cfg.refine} unique={len(self.unique)}")

    def equilibrium(self, system, x):
        """Equilibrium x* of the linear flow under B frozen at the positions of x."""
        if isinstance(self.cfg.nonlinearity, ZeroNonlinearity):
            return 0.0
        pos = system.positions(x)
        forcing = np.stack([self.cfg.nonlinearity.apply(pos[..., j]) for j in range(pos.shape[-1])], axis=-1)
        return system.embedForcing(forcing)

    def mixing(self, states):
        """Per system noise matrices G of shape (P, N, N), or None for additive noise."""
        g = self.cfg.multiplicativeG
        if g is None:
            return [None] * len(self.systems)
        return [g.modeMatrix(system.positions(x)[..., 0], self.lambdas) for system, x in zip(self.systems, states)]

    def noise(self, states, stepIndex, stream):
        """ Stochastic convolution of every system over one step.

            Parameters
            ----------
            states: list[np.ndarray]
                left endpoint states, each (P, N, D).
            stepIndex: int
                counter of the step; fine block i uses counter stepIndex·refine + i.
            stream: NoiseStream

            Returns
            -------
            (list[np.ndarray], list[np.ndarray]):
                the convolution per system, and the noise increments ΔN per system of shape (P, N, noiseDim).
        """
        P, N = states[0].shape[:2]
        if self.silent:
            return [np.zeros_like(x) for x in states], [np.zeros((P, N, self.noiseDim)) for _ in states]
        mixes = self.mixing(states)
        acc = [np.zeros_like(x) for x in states]
        increments = [np.zeros((P, N, self.noiseDim)) for _ in states]
        refine = self.cfg.refine
        for i in range(refine):
            counter = stepIndex * refine + i
            if self.crossFactor is None:
                z = stream.normals(counter, (P, N, self.width))
                shared = np.einsum("nij,pnj->pni", self.factor, self.lambdas[:, None] * z)
            else:
                # eta[p, j, n] is the response of mode n to the unit Brownian motion β_j
                z = stream.normals(counter, (P, N, N * self.width))
                eta = np.einsum("ab,pjb->pja", self.crossFactor, z).reshape(P, N, N, self.width)
            for s, system in enumerate(self.systems):
                u = self.index[s]
                if mixes[s] is None:
                    y = shared
                else:
                    y = np.einsum("pnj,pjnc->pnc", mixes[s], eta)
                acc[s] = np.einsum("nab,pnb->pna", self.fine[u], acc[s]) + y[..., self.rows[u]]
                increments[s] += y[..., :self.noiseDim]
        return acc, increments

    def step(self, states, stepIndex, stream):
        """ Advance every system by one step.

            Parameters
            ----------
            states: list[np.ndarray]
                one (P, N, D) array per system.
            stepIndex: int
                global index of the step, selects the noise block.
            stream: NoiseStream

            Returns
            -------
            (list[np.ndarray], list[np.ndarray], np.ndarray):
                the new states, the noise increments and the mask of paths whose state is not finite or
                exceeds the blow-up threshold.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            noise, increments = self.noise(states, stepIndex, stream)
            out = []
            for s, (system, x) in enumerate(zip(self.systems, states)):
                target = self.equilibrium(system, x)
                flow = np.einsum("nab,pnb->pna", self.coarse[self.index[s]], x - target)
                out.append(flow + target + noise[s])
            bad = np.zeros(states[0].shape[0], dtype=bool)
            for x in out:
                bad |= ~np.all(np.isfinite(x), axis=(1, 2))
                bad |= np.any(np.abs(x) > SkramConfig.blow_up_threshold, axis=(1, 2))
        return out, increments, bad


def stepperFor(cfg, systems):
    """Stepper of the given systems, cached on the configuration."""
    key = tuple(system.key() for system in systems)
    if key not in cfg.steppers:
        cfg.steppers[key] = ModeStepper(cfg, systems)
    return cfg.steppers[key]


def systemFor(kind, cfg):
    """Mode system of the given kind on the configuration's basis."""
    if kind in ("wave", "magnetic") and cfg.mu is None:
        raise ConfigurationError(f"the {kind} system needs a mass mu")
    return makeSystem(kind, cfg.basis, cfg.mu, cfg.eps)


def inferKind(state):
    """System kind matching a ``ModeField`` or ``PhaseState``."""
    scalar = state.basis.vectorDim == 1
    if isinstance(state, PhaseState):
        return "wave" if scalar else "magnetic"
    if isinstance(state, ModeField):
        return "heat" if scalar else "rotated_heat"
    raise ConfigurationError(f"cannot infer the mode system of {type(state).__name__}, pass kind explicitly")


def initialArray(system, cfg, z0, nPaths=None):
    """ Ensemble array (P, N, D) of an initial condition.

        Parameters
        ----------
        system: ModeSystemInterface
        cfg: SolverConfig
        z0: ModeField, PhaseState or np.ndarray
            a single state, replicated over ``nPaths`` paths, or an array of shape (N, D) or (P, N, D).
        nPaths: int
            number of paths for a single state, defaults to one.
    """
    if isinstance(z0, (ModeField, PhaseState)):
        cfg.basis.checkSame(z0.basis, "initial state")
        x = system.toArray(z0)[None]
        return np.repeat(x, 1 if nPaths is None else int(nPaths), axis=0)
    x = np.array(z0, dtype=float)
    if x.ndim == 2:
        x = x[None]
    expected = (cfg.basis.N, system.stateDim)
    if x.ndim != 3 or x.shape[1:] != expected:
        raise ConfigurationError(f"initial array must have shape (P, {expected[0]}, {expected[1]}), got {x.shape}")
    return x


def positionDistance(systemA, xA, systemB, xB):
    """H distance between the positions of two ensembles, one value per path."""
    diff = systemA.positions(xA) - systemB.positions(xB)
    return np.sqrt(np.sum(diff * diff, axis=(-2, -1)))


def simulateSystems(cfg, systems, states, stream, recordNoise=False, track=None):
    """ Iterate a group of systems driven by the same noise.

        Parameters
        ----------
        cfg: SolverConfig
        systems: list[ModeSystemInterface]
        states: list[np.ndarray]
            initial ensembles, one (P, N, D) array per system.
        stream: NoiseStream
            step n uses the counter ``stream.counter + n``; the counter is advanced past the run.
        recordNoise: bool
            store the noise increments of every step in the trajectories.
        track: (int, int)
            pair of system indices whose position distance is tracked at every step.

        Returns
        -------
        (list[Trajectory], np.ndarray):
            one trajectory per system and, when ``track`` is given, the per path supremum over all step
            times of the position distance (NaN for failed paths).
    """
    stepper = stepperFor(cfg, systems)
    states = [np.array(x, dtype=float) for x in states]
    P = states[0].shape[0]
    if any(x.shape[0] != P for x in states):
        raise ConfigurationError("coupled ensembles must have the same number of paths")
    failed = np.zeros(P, dtype=bool)
    start = stream.counter
    nSteps = cfg.nSteps()
    times = [0.0]
    records = [[x.copy()] for x in states]
    noise = [[] for _ in systems] if recordNoise else None
    sup = None
    if track is not None:
        i, j = track
        if len(systems[i].positionSlots) != len(systems[j].positionSlots):
            raise ConfigurationError("tracked systems must have positions of the same shape")
        sup = positionDistance(systems[i], states[i], systems[j], states[j])

    for n in range(nSteps):
        states, increments, bad = stepper.step(states, start + n, stream)
        fresh = bad & ~failed
        if np.any(fresh):
            paths = np.flatnonzero(fresh)
            if cfg.strict:
                raise BlowUpError(start + n, paths)
            logger.warning(f"blow-up at step {start + n} on {paths.size} paths, marking them as failed")
            failed |= fresh
        if np.any(failed):
            for x in states:
                x[failed] = np.nan
        if track is not None:
            with np.errstate(invalid="ignore"):
                sup = np.fmax(sup, positionDistance(systems[i], states[i], systems[j], states[j]))
        if recordNoise:
            for s, dN in enumerate(increments):
                noise[s].append(dN)
        if (n + 1) % cfg.recordEvery == 0:
            times.append((n + 1) * cfg.h)
            for s, x in enumerate(states):
                records[s].append(x.copy())
    stream.counter = start + nSteps

    trajectories = []
    for s, system in enumerate(systems):
        dN = None
        if recordNoise:
            dN = np.array(noise[s]) if noise[s] else np.zeros((0, P, cfg.basis.N, system.noiseDim))
        trajectories.append(Trajectory(times, np.array(records[s]), system, cfg, dN, failed.copy()))
    if sup is not None:
        sup = np.where(failed, np.nan, sup)
    return trajectories, sup


def simulate(cfg, z0, stream, kind=None, nPaths=None, recordNoise=False):
    """ Iterate the stepper of the system matching ``z0`` up to the horizon.

        Parameters
        ----------
        cfg: SolverConfig
        z0: ModeField, PhaseState or np.ndarray
            initial state; arrays need ``kind``.
        stream: NoiseStream
        kind: str
            ``wave``, ``heat``, ``magnetic`` or ``rotated_heat``; inferred from the type of a state.
        nPaths: int
            number of paths started from a single state.
        recordNoise: bool
            keep the noise increments, needed by the residual diagnostic.

        Returns
        -------
        Trajectory:
            floor(T/h)/record_every + 1 recorded states.
    """
    kind = kind if kind is not None else inferKind(z0)
    system = systemFor(kind, cfg)
    trajectories, _ = simulateSystems(cfg, [system], [initialArray(system, cfg, z0, nPaths)], stream, recordNoise)
    return trajectories[0]


def _singleStep(kind, state, cfg, stream):
    cfg.basis.checkSame(state.basis, "state")
    system = systemFor(kind, cfg)
    stepper = stepperFor(cfg, [system])
    out, _, bad = stepper.step([system.toArray(state)[None]], stream.counter, stream)
    if bad[0]:
        raise BlowUpError(stream.counter, [0])
    stream.counter += 1
    return system.fromArray(cfg.basis, out[0][0])


def stepWave(state, cfg, stream):
    """ One mild exponential Euler step of the damped wave equation.

        Parameters
        ----------
        state: PhaseState
        cfg: SolverConfig
            needs ``mu``.
        stream: NoiseStream
            the step uses ``stream.counter`` and advances it.

        Returns
        -------
        PhaseState
    """
    return _singleStep("wave", state, cfg, stream)


def stepHeat(state, cfg, stream):
    """One exponential Euler step of the heat equation with exact Ornstein-Uhlenbeck noise."""
    return _singleStep("heat", state, cfg, stream)


def stepMagnetic(state, cfg, stream):
    """One mild step of the magnetic system; ``state`` lives on a two component basis."""
    if cfg.basis.vectorDim != 2:
        raise ConfigurationError("the magnetic system needs a basis with vector_dim = 2")
    return _singleStep("magnetic", state, cfg, stream)


def coupledMismatches(cfgA, cfgB):
    """Names of the fields two configurations must share to be driven by one noise."""
    mismatches = []
    if not cfgA.basis.sameAs(cfgB.basis):
        mismatches.append("basis")
    a, b = cfgA.describe(), cfgB.describe()
    for field in ("covariance", "nonlinearity", "multiplicative_g", "h", "T", "refine", "noise_scale"):
        if a[field] != b[field]:
            mismatches.append(field)
    return mismatches


def simulateCoupled(cfg, systems, states, stream, recordNoise=False):
    """ Simulate several systems on one noise and track the distance between the first two.

        Parameters
        ----------
        cfg: SolverConfig
        systems: list[ModeSystemInterface]
        states: list
            initial states or arrays, one per system.
        stream: NoiseStream

        Returns
        -------
        (list[Trajectory], np.ndarray):
            trajectories and per path sup over the step times of the position distance of systems 0 and 1.
    """
    arrays = [initialArray(system, cfg, z, None) for system, z in zip(systems, states)]
    P = max(x.shape[0] for x in arrays)
    arrays = [np.repeat(x, P, axis=0) if x.shape[0] == 1 else x for x in arrays]
    return simulateSystems(cfg, systems, arrays, stream, recordNoise, track=(0, 1))


def simulateCoupledPair(waveCfg, heatCfg, z0, stream, nPaths=None, recordNoise=False):
    """ Drive the damped wave equation and its heat limit with identical Brownian increments.

        Parameters
        ----------
        waveCfg: SolverConfig
            configuration of the wave side, needs ``mu``.
        heatCfg: SolverConfig
            configuration of the heat side; must share basis, covariance, nonlinearity, step and horizon.
        z0: PhaseState or np.ndarray
            initial wave state; the heat side starts from its position. Arrays have shape (P, N, 2).
        stream: NoiseStream
        nPaths: int
            number of paths started from a single state.

        Returns
        -------
        (Trajectory, Trajectory, float or np.ndarray):
            the two trajectories and sup_t |u^μ(t) − u(t)|_H over every step time, one value per path for
            ensembles.
    """
    mismatches = coupledMismatches(waveCfg, heatCfg)
    if mismatches:
        raise ConfigurationError(f"coupled configurations differ in {mismatches}")
    wave = systemFor("wave", waveCfg)
    heat = systemFor("heat", waveCfg)
    x0 = initialArray(wave, waveCfg, z0, nPaths)
    trajectories, sup = simulateSystems(waveCfg, [wave, heat], [x0, x0[..., :1]], stream, recordNoise, track=(0, 1))
    single = isinstance(z0, PhaseState) and nPaths is None
    return trajectories[0], trajectories[1], float(sup[0]) if single else sup
