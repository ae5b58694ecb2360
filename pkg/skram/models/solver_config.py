import numpy as np

from skram.models.covariance_spec import CovarianceSpec, lambdasOf
from skram.models.nonlinearity import ZeroNonlinearity
from skram.utils.run_report import ConfigurationError
from skram.utils.utils import writeCsv


class SolverConfig():
    """Everything a mild-solution stepper needs besides the state and the noise stream."""

    def __init__(self, basis, covariance, nonlinearity=None, mu=None, eps=0.0, multiplicativeG=None, h=0.01, T=1.0,
                 quadraturePoints=None, recordEvery=1, refine=1, noiseScale=1.0, strict=True):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            covariance: CovarianceSpec or np.ndarray
                noise covariance, or the N eigenvalues λ_k directly.
            nonlinearity: NonlinearityInterface
                drift B, defaults to zero.
            mu: float
                mass of the wave and magnetic systems.
            eps: float
                friction of the magnetic systems.
            multiplicativeG: NoiseCoefficient
                pointwise noise coefficient g, None for additive noise.
            h: float
                step.
            T: float
                horizon; 0 gives a single state, otherwise T ≥ h.
            quadraturePoints: int
                collocation points of the pointwise terms, defaults to 4N.
            recordEvery: int
                a state is recorded every ``recordEvery`` steps.
            refine: int
                number of fine noise blocks composed into one step.
            noiseScale: float
                factor multiplying every λ_k, √ε for small noise runs.
            strict: bool
                if True a blow-up raises, otherwise the affected paths are marked as failed.
        """
        if not (np.isfinite(h) and h > 0):
            raise ConfigurationError(f"step must be positive, got h={h}")
        if not (np.isfinite(T) and T >= 0):
            raise ConfigurationError(f"horizon must be nonnegative, got T={T}")
        if 0 < T < h * (1.0 - 1e-9):
            raise ConfigurationError(f"horizon must satisfy T ≥ h, got T={T} and h={h}")
        if mu is not None and not mu > 0:
            raise ConfigurationError(f"mass must be positive, got mu={mu}")
        if eps < 0:
            raise ConfigurationError(f"friction must be nonnegative, got eps={eps}")
        if int(recordEvery) != recordEvery or recordEvery < 1:
            raise ConfigurationError(f"record_every must be a positive integer, got {recordEvery}")
        if int(refine) != refine or refine < 1:
            raise ConfigurationError(f"refine must be a positive integer, got {refine}")
        if noiseScale < 0:
            raise ConfigurationError(f"noise scale must be nonnegative, got {noiseScale}")
        nonlinearity = ZeroNonlinearity(basis) if nonlinearity is None else nonlinearity
        basis.checkSame(nonlinearity.basis, "nonlinearity")
        if multiplicativeG is not None:
            basis.checkSame(multiplicativeG.basis, "noise coefficient")
        self.basis = basis
        self.covariance = covariance
        self.nonlinearity = nonlinearity
        self.mu = None if mu is None else float(mu)
        self.eps = float(eps)
        self.multiplicativeG = multiplicativeG
        self.h = float(h)
        self.T = float(T)
        self.quadraturePoints = quadraturePoints
        self.recordEvery = int(recordEvery)
        self.refine = int(refine)
        self.noiseScale = float(noiseScale)
        self.strict = bool(strict)
        self.steppers = {}

    def __repr__(self):
        return f"SolverConfig(h={self.h}, T={self.T}, mu={self.mu}, eps={self.eps}, basis={self.basis!r})"

    def nSteps(self):
        """Number of steps floor(T/h)."""
        return int(np.floor(self.T / self.h + 1e-9))

    def lambdas(self):
        """Noise eigenvalues including the noise scale."""
        return self.noiseScale * lambdasOf(self.covariance, self.basis)

    def copy(self, **overrides):
        """Copy of the configuration with some fields replaced; the stepper cache is not shared."""
        fields = {
            "basis": self.basis, "covariance": self.covariance, "nonlinearity": self.nonlinearity, "mu": self.mu,
            "eps": self.eps, "multiplicativeG": self.multiplicativeG, "h": self.h, "T": self.T,
            "quadraturePoints": self.quadraturePoints, "recordEvery": self.recordEvery, "refine": self.refine,
            "noiseScale": self.noiseScale, "strict": self.strict,
        }
        unknown = set(overrides) - set(fields)
        if unknown:
            raise ConfigurationError(f"unknown solver fields {sorted(unknown)}")
        fields.update(overrides)
        return SolverConfig(**fields)

    def describe(self):
        """Plain dictionary of the configuration for manifests and comparisons."""
        if isinstance(self.covariance, CovarianceSpec):
            covariance = self.covariance.toDict()
        else:
            covariance = [float(v) for v in np.asarray(self.covariance).reshape(-1)]
        return {
            "basis": {"L": self.basis.L, "N": self.basis.N, "vector_dim": self.basis.vectorDim},
            "covariance": covariance,
            "nonlinearity": self.nonlinearity.describe(),
            "mu": self.mu,
            "eps": self.eps,
            "multiplicative_g": None if self.multiplicativeG is None else self.multiplicativeG.describe(),
            "h": self.h,
            "T": self.T,
            "quadrature_points": self.quadraturePoints,
            "record_every": self.recordEvery,
            "refine": self.refine,
            "noise_scale": self.noiseScale,
        }


class Trajectory():
    """Recorded states of an ensemble of paths of one mode system.

    ``states`` has shape (K, P, N, D) for K recorded times and P paths. ``noise`` holds the increments
    ΔN_k of the driving noise of every step, shape (nSteps, P, N, noiseDim).
    """

    def __init__(self, times, states, system, config, noise=None, failed=None):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.system = system
        self.config = config
        self.noise = noise
        self.failed = np.zeros(self.states.shape[1], dtype=bool) if failed is None else np.asarray(failed)

    def __len__(self):
        return self.times.size

    @property
    def nPaths(self):
        return self.states.shape[1]

    @property
    def basis(self):
        return self.config.basis

    def positions(self):
        """Position coefficients, shape (K, P, N), complex for two component systems."""
        return self.system.complexPositions(self.states)

    def velocities(self):
        """Velocity coefficients, shape (K, P, N); None for first order systems."""
        D = self.system.stateDim
        if D == len(self.system.positionSlots):
            return None
        if D == 2:
            return self.states[..., 1]
        return self.states[..., 2] + 1j * self.states[..., 3]

    def stateAt(self, k, path=0):
        """Recorded state k of one path as a ``ModeField`` or ``PhaseState``."""
        return self.system.fromArray(self.basis, self.states[k, path])

    def final(self, path=0):
        return self.stateAt(-1, path)

    def csvHeader(self):
        N = self.basis.N
        D = self.system.stateDim
        if D == 1:
            return ["t"] + [f"mode_{k}_u" for k in range(1, N + 1)]
        if D == 2 and self.system.positionSlots == (0,):
            return ["t"] + [f"mode_{k}_{c}" for c in ("u", "v") for k in range(1, N + 1)]
        components = ("u",) if D == 2 else ("u", "v")
        return ["t"] + [f"mode_{k}_{c}_{part}" for c in components for part in ("re", "im")
                        for k in range(1, N + 1)]

    def toCsv(self, path, pathIndex=0):
        """ Write one path to CSV.

            Columns are ``t`` followed by the position coefficients of every mode and then the velocity
            coefficients; two component systems write real and imaginary parts in separate columns.

            Parameters
            ----------
            path: str
                target file.
            pathIndex: int
                index of the path in the ensemble.
        """
        x = self.states[:, pathIndex]
        if self.system.stateDim == 4:
            blocks = [x[..., 0], x[..., 1], x[..., 2], x[..., 3]]
        else:
            blocks = [x[..., d] for d in range(self.system.stateDim)]
        rows = np.concatenate([self.times[:, None]] + blocks, axis=1)
        writeCsv(path, self.csvHeader(), rows.tolist())
