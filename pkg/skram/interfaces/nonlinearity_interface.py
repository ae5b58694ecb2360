import numpy as np

from skram.utils.utils import whichFunc


class NonlinearityInterface():
    """Interface of the drift B acting on coefficient arrays of shape (..., N)."""
    isGradient = False

    def __init__(self, basis):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
                basis of the coefficient arrays.
        """
        self.basis = basis

    @staticmethod
    def getName():
        """Name used in configurations.

            Returns
            -------
            str
        """
        return "nonlinearity_not_selected"

    def apply(self, u):
        """ Evaluate B(u).

            Parameters
            ----------
            u: np.ndarray
                coefficients, shape (..., N).

            Returns
            -------
            np.ndarray:
                coefficients of B(u), same shape.
        """
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from NonlinearityInterface and must implement {whichFunc()}")

    def jvp(self, u, du):
        """ Directional derivative DB(u)·du."""
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from NonlinearityInterface and must implement {whichFunc()}")

    def vjp(self, u, w):
        """ Transposed derivative DB(u)ᵀ·w."""
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from NonlinearityInterface and must implement {whichFunc()}")

    def lipschitz(self):
        """ Global Lipschitz constant of B in H; ``inf`` when B is not globally Lipschitz."""
        raise NotImplementedError(
            f"{self.__class__.__name__} inherits from NonlinearityInterface and must implement {whichFunc()}")

    def potential(self, u):
        """ Potential F with B = −Q²DF; only gradient drifts have one."""
        raise NotImplementedError(
            f"{self.__class__.__name__} is not of gradient type and has no potential")

    def jacobian(self, u):
        """ Dense derivative of shape (..., N, N), assembled column by column from ``jvp``."""
        u = np.asarray(u, dtype=float)
        N = u.shape[-1]
        eye = np.eye(N)
        cols = [self.jvp(u, np.broadcast_to(eye[j], u.shape)) for j in range(N)]
        return np.stack(cols, axis=-1)

    def flags(self):
        """ Hypothesis flags of the drift.

            Returns
            -------
            dict:
                ``gradient_drift`` and ``lipschitz_below_gap``.
        """
        zero = self.apply(np.zeros(self.basis.N))
        return {
            "gradient_drift": bool(self.isGradient),
            "lipschitz_below_gap": bool(self.lipschitz() < self.basis.alphas[0] and np.allclose(zero, 0.0)),
        }

    def describe(self):
        return {"kind": self.getName()}
