import numpy as np

from skram.utils.utils import whichFunc


class ModeSystemInterface():
    """Interface of a linear system that is diagonal in the spectral basis.

    A state is a real array of shape (P, N, D): P paths, N modes and D real slots per mode. Noise enters
    every mode through ``noiseDim`` independent Brownian motions.
    """
    stateDim = 1
    noiseDim = 1
    positionSlots = (0,)

    def __init__(self, alphas):
        """Initialize function.

            Parameters
            ----------
            alphas: np.ndarray
                eigenvalues of the truncation.
        """
        self.alphas = np.asarray(alphas, dtype=float)

    @staticmethod
    def getName():
        """Name of the system.

            Returns
            -------
            str:
                the name used in configurations and logs.
        """
        return "system_not_selected"

    def key(self):
        """ Tuple identifying the dynamics; two systems with the same key evolve identically.

            Returns
            -------
            tuple
        """
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from ModeSystemInterface and must implement {whichFunc()}")

    def propagator(self, t):
        """ Fundamental matrix of every mode.

            Parameters
            ----------
            t: float or np.ndarray
                time or array of S times.

            Returns
            -------
            np.ndarray:
                shape (N, D, D), or (S, N, D, D) for an array of times.
        """
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from ModeSystemInterface and must implement {whichFunc()}")

    def injection(self):
        """ Matrix mapping the Brownian increments of a mode into its state slots.

            Returns
            -------
            np.ndarray:
                shape (N, D, noiseDim).
        """
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from ModeSystemInterface and must implement {whichFunc()}")

    def toArray(self, state):
        """ Convert a ``ModeField`` or ``PhaseState`` to an array of shape (N, D)."""
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from ModeSystemInterface and must implement {whichFunc()}")

    def fromArray(self, basis, x):
        """ Convert an array of shape (N, D) back to a ``ModeField`` or ``PhaseState``."""
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from ModeSystemInterface and must implement {whichFunc()}")

    def sameAs(self, other):
        return other is not None and self.key() == other.key()

    def kernel(self, sigma):
        """Noise kernel Φ(σ)·Inj of shape (S, N, D, noiseDim) for an array of S lags."""
        return np.einsum("snab,nbc->snac", self.propagator(np.asarray(sigma, dtype=float)), self.injection())

    def positions(self, x):
        """Position slots of a state array, shape (P, N, len(positionSlots))."""
        return x[..., list(self.positionSlots)]

    def positionNorm(self, x):
        """H norm of the position of every path of a state array."""
        pos = self.positions(x)
        return np.sqrt(np.sum(pos * pos, axis=(-2, -1)))

    def complexPositions(self, x):
        """Positions as N coefficients per path, complex for two component systems."""
        pos = self.positions(x)
        if pos.shape[-1] == 2:
            return pos[..., 0] + 1j * pos[..., 1]
        return pos[..., 0]

    def embedForcing(self, forcing):
        """ Equilibrium x* of the mode dynamics under a constant forcing.

            With x* the exponential Euler step reads x ↦ Φ(h)(x − x*) + x*, which integrates a forcing that
            is frozen over the step exactly.

            Parameters
            ----------
            forcing: np.ndarray
                values of B on the position slots, shape (P, N, len(positionSlots)).

            Returns
            -------
            np.ndarray:
                shape (P, N, D).
        """
        target = np.zeros(forcing.shape[:-1] + (self.stateDim,))
        target[..., list(self.positionSlots)] = forcing / self.alphas[:, None]
        return target
