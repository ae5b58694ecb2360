import numpy as np

from skram.utils.run_report import ConfigurationError


class PolynomialTestFunction():
    """Test function φ(t, x) = Σ_k φ_k(t) e_k(x) with polynomial coefficients φ_k(t) = Σ_j c_kj t^j.

    Finite mode sums vanish on the boundary, and time derivatives and Δφ are exact.
    """

    def __init__(self, basis, coeffs):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            coeffs: np.ndarray
                shape (N, degree + 1); column j multiplies t^j.
        """
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if coeffs.shape[0] != basis.N:
            raise ConfigurationError(f"test function needs {basis.N} rows of coefficients, got {coeffs.shape[0]}")
        self.basis = basis
        self.coeffs = coeffs

    @staticmethod
    def singleMode(basis, k, amplitude=1.0):
        """Time independent φ = amplitude·e_k."""
        coeffs = np.zeros((basis.N, 1))
        coeffs[k - 1, 0] = amplitude
        return PolynomialTestFunction(basis, coeffs)

    def values(self, t):
        """Mode coefficients at the given times, shape (len(t), N)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        powers = t[:, None] ** np.arange(self.coeffs.shape[1])
        return powers @ self.coeffs.T

    def derivative(self, t, order=1):
        """Mode coefficients of the time derivative of the given order, shape (len(t), N)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        coeffs = self.coeffs
        for _ in range(order):
            coeffs = coeffs[:, 1:] * np.arange(1, coeffs.shape[1])
        if coeffs.shape[1] == 0:
            return np.zeros((t.size, self.basis.N))
        powers = t[:, None] ** np.arange(coeffs.shape[1])
        return powers @ coeffs.T

    def laplacian(self, t):
        """Mode coefficients of Δφ = −α_k φ_k."""
        return -self.basis.alphas * self.values(t)
