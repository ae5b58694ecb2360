import numpy as np


class WaveModeCoeffs():
    """The 2×2 matrix sending (u_k, v_k) to (f_k(t), g_k(t)) for the damped wave mode μu'' + u' + αu = 0.

    Entries may be arrays when the propagator is evaluated for several eigenvalues or times at once.
    """

    def __init__(self, fu, fv, gu, gv, branch):
        """Initialize function.

            Parameters
            ----------
            fu, fv: np.ndarray
                position response to a unit position and a unit velocity.
            gu, gv: np.ndarray
                velocity response to a unit position and a unit velocity.
            branch: str or np.ndarray
                ``overdamped``, ``critical`` or ``underdamped`` per entry.
        """
        self.fu = fu
        self.fv = fv
        self.gu = gu
        self.gv = gv
        self.branch = branch

    def matrix(self):
        """Matrix form with shape (..., 2, 2)."""
        top = np.stack([self.fu, self.fv], axis=-1)
        bottom = np.stack([self.gu, self.gv], axis=-1)
        return np.stack([top, bottom], axis=-2)

    def determinant(self):
        return self.fu * self.gv - self.fv * self.gu

    def apply(self, u, v):
        return self.fu * u + self.fv * v, self.gu * u + self.gv * v

    def __repr__(self):
        return f"WaveModeCoeffs(fu={self.fu}, fv={self.fv}, gu={self.gu}, gv={self.gv}, branch={self.branch})"


class MagneticModeCoeffs():
    """Complex 2×2 matrix propagating (w_k, w'_k) for μw'' + (ε − i)w' + αw = 0, with w = u¹ + iu²."""

    def __init__(self, a11, a12, a21, a22, mu, eps):
        self.a11 = a11
        self.a12 = a12
        self.a21 = a21
        self.a22 = a22
        self.mu = mu
        self.eps = eps

    def matrix(self):
        """Complex matrix form with shape (..., 2, 2)."""
        top = np.stack([self.a11, self.a12], axis=-1)
        bottom = np.stack([self.a21, self.a22], axis=-1)
        return np.stack([top, bottom], axis=-2)

    def realMatrix(self):
        """Real 4×4 form acting on (Re w, Im w, Re w', Im w')."""
        def block(c):
            top = np.stack([c.real, -c.imag], axis=-1)
            bottom = np.stack([c.imag, c.real], axis=-1)
            return np.stack([top, bottom], axis=-2)
        upper = np.concatenate([block(self.a11), block(self.a12)], axis=-1)
        lower = np.concatenate([block(self.a21), block(self.a22)], axis=-1)
        return np.concatenate([upper, lower], axis=-2)

    def apply(self, w, dw):
        return self.a11 * w + self.a12 * dw, self.a21 * w + self.a22 * dw
