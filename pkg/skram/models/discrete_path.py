import numpy as np
import scipy.sparse as sp
from loguru import logger

from skram.models.spectral_basis import ModeField
from skram.utils.run_report import ConfigurationError
from skram.utils.utils import writeCsv


def geometricGrid(T, M, growth=20.0):
    """ Grid of M + 1 nodes on [−T, 0] whose steps shrink geometrically towards 0.

        Parameters
        ----------
        T: float
            horizon, positive.
        M: int
            number of intervals.
        growth: float
            ratio of the first (largest) to the last (smallest) step, at least 1.

        Returns
        -------
        np.ndarray:
            strictly increasing times ending exactly at 0.
    """
    if not T > 0 or M < 1 or growth < 1:
        raise ConfigurationError(f"invalid grid T={T}, M={M}, growth={growth}")
    if M == 1:
        return np.array([-float(T), 0.0])
    ratio = growth ** (1.0 / (M - 1))
    steps = ratio ** np.arange(M - 1, -1, -1)
    steps *= T / np.sum(steps)
    times = np.concatenate([[0.0], np.cumsum(steps)]) - T
    times[-1] = 0.0
    return times


def velocityStencil(times):
    """ Sparse matrix of the three point derivative on a nonuniform grid.

        Interior nodes use the centered nonuniform formula, the two end nodes the one sided second order
        formula.

        Parameters
        ----------
        times: np.ndarray
            at least three strictly increasing nodes.

        Returns
        -------
        scipy.sparse.csr_matrix:
            D with (Dφ)_n ≈ φ'(t_n).
    """
    h = np.diff(times)
    n = times.size
    rows, cols, vals = [], [], []

    def put(row, entries):
        for col, val in entries:
            rows.append(row)
            cols.append(col)
            vals.append(val)

    a, b = h[0], h[1]
    put(0, [(0, -(2 * a + b) / (a * (a + b))), (1, (a + b) / (a * b)), (2, -a / (b * (a + b)))])
    for i in range(1, n - 1):
        a, b = h[i - 1], h[i]
        put(i, [(i - 1, -b / (a * (a + b))), (i, (b - a) / (a * b)), (i + 1, a / (b * (a + b)))])
    a, b = h[-2], h[-1]
    put(n - 1, [(n - 3, b / (a * (a + b))), (n - 2, -(a + b) / (a * b)), (n - 1, (2 * b + a) / (b * (a + b)))])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class DiscretePath():
    """Positions of a path at the nodes t₀ < … < t_M = 0, the object the action functionals act on."""

    minNodes = 8

    def __init__(self, basis, times, fields, velocities=None, decayThreshold=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            times: np.ndarray
                strictly increasing nodes ending at 0.
            fields: np.ndarray or list[ModeField]
                positions, shape (M + 1, N).
            velocities: np.ndarray
                optional node velocities; the three point stencil is used otherwise.
            decayThreshold: float
                bound on |φ(t₀)|_H, defaults to 1e-3·|φ(0)|_H.
        """
        times = np.asarray(times, dtype=float)
        if isinstance(fields, (list, tuple)) and fields and isinstance(fields[0], ModeField):
            fields = np.array([f.coeffs for f in fields])
        fields = np.array(fields, dtype=float)
        if times.ndim != 1 or times.size < DiscretePath.minNodes:
            raise ConfigurationError(f"a path needs at least {DiscretePath.minNodes} nodes, got {times.size}")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("path times must be strictly increasing")
        if abs(times[-1]) > 1e-12:
            raise ConfigurationError(f"path must end at t = 0, ends at {times[-1]}")
        if fields.shape != (times.size, basis.N):
            raise ConfigurationError(f"fields must have shape {(times.size, basis.N)}, got {fields.shape}")
        if velocities is not None:
            velocities = np.array(velocities, dtype=float)
            if velocities.shape != fields.shape:
                raise ConfigurationError("velocities must have the shape of the fields")
        self.basis = basis
        self.times = times
        self.fields = fields
        self.velocities = velocities
        self.decayThreshold = decayThreshold

    @property
    def steps(self):
        return np.diff(self.times)

    @property
    def endpoint(self):
        return ModeField(self.basis, self.fields[-1])

    def nodeVelocities(self):
        if self.velocities is not None:
            return self.velocities
        return velocityStencil(self.times) @ self.fields

    def withFields(self, fields):
        return DiscretePath(self.basis, self.times, fields, None, self.decayThreshold)

    def threshold(self):
        if self.decayThreshold is not None:
            return self.decayThreshold
        return 1e-3 * np.linalg.norm(self.fields[-1])

    def decays(self):
        """True when the start node is below the decay threshold."""
        return bool(np.linalg.norm(self.fields[0]) <= self.threshold())

    def checkDecay(self):
        if not self.decays():
            logger.warning(f"path starts at |φ(t₀)| = {np.linalg.norm(self.fields[0]):.3g}, above the decay "
                           f"threshold {self.threshold():.3g}; increase the horizon")
        return self.decays()

    def toCsv(self, path):
        """Trajectory style CSV: ``t``, the positions and the node velocities of every mode."""
        N = self.basis.N
        header = ["t"] + [f"mode_{k}_u" for k in range(1, N + 1)] + [f"mode_{k}_v" for k in range(1, N + 1)]
        rows = np.concatenate([self.times[:, None], self.fields, self.nodeVelocities()], axis=1)
        writeCsv(path, header, rows.tolist())


class QuasiPotentialResult():
    """Outcome of an action minimization; non convergence is reported, never raised."""

    def __init__(self, value, minimizer, converged, gradientNormAtExit, iterations=0, penalty=0.0):
        self.value = float(value)
        self.minimizer = minimizer
        self.converged = bool(converged)
        self.gradientNormAtExit = float(gradientNormAtExit)
        self.iterations = int(iterations)
        self.penalty = float(penalty)

    def __repr__(self):
        return (f"QuasiPotentialResult(value={self.value:.6g}, converged={self.converged}, "
                f"gradient_norm={self.gradientNormAtExit:.3g}, iterations={self.iterations})")

    def toDict(self):
        return {
            "value": self.value,
            "converged": self.converged,
            "gradient_norm": self.gradientNormAtExit,
            "iterations": self.iterations,
            "penalty": self.penalty,
        }
