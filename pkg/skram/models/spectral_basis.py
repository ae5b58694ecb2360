import numpy as np

from skram.utils.run_report import BasisMismatchError, ConfigurationError, DomainError
from skram.utils.utils import gaussLegendre


class SpectralBasis():
    """Dirichlet eigenpairs of the Laplacian on [0, L] truncated at N modes.

    The eigenvalues are α_k = (kπ/L)² and the eigenfunctions e_k(x) = √(2/L)·sin(kπx/L), k = 1..N.
    Instances are immutable and safe to share between threads.
    """

    def __init__(self, L=np.pi, N=1, vectorDim=1):
        """Initialize function.

            Parameters
            ----------
            L: float
                interval length.
            N: int
                truncation level.
            vectorDim: int
                1 for scalar fields, 2 for two component fields stored as complex coefficients.
        """
        if not np.isfinite(L) or L <= 0:
            raise ConfigurationError(f"interval length must be positive, got L={L}")
        if int(N) != N or N < 1:
            raise ConfigurationError(f"truncation level must be a positive integer, got N={N}")
        if vectorDim not in (1, 2):
            raise ConfigurationError(f"vector_dim must be 1 or 2, got {vectorDim}")
        self.L = float(L)
        self.N = int(N)
        self.vectorDim = int(vectorDim)
        self.modes = np.arange(1, self.N + 1)
        self.alphas = (self.modes * np.pi / self.L) ** 2
        self.alphas.setflags(write=False)
        self.basisId = (self.L, self.N, self.vectorDim)
        self._quadrature = {}

    def __repr__(self):
        return f"SpectralBasis(L={self.L}, N={self.N}, vector_dim={self.vectorDim})"

    def sameAs(self, other):
        return other is not None and self.basisId == other.basisId

    def checkSame(self, other, what="field"):
        """Raise a basis mismatch error when ``other`` is built on another basis."""
        if not self.sameAs(other):
            raise BasisMismatchError(f"{what} lives on {other!r}, expected {self!r}")

    def eigenfunctions(self, x):
        """Evaluate every eigenfunction at the given points.

            Parameters
            ----------
            x: np.ndarray
                points in [0, L].

            Returns
            -------
            np.ndarray:
                matrix of shape (len(x), N).
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.sqrt(2.0 / self.L) * np.sin(np.outer(x, self.modes) * np.pi / self.L)

    def quadrature(self, points=None):
        """Gauss-Legendre nodes, weights and eigenfunction values on [0, L].

            Parameters
            ----------
            points: int
                number of collocation points, defaults to 4N.

            Returns
            -------
            (np.ndarray, np.ndarray, np.ndarray):
                nodes (M,), weights (M,) and eigenfunction matrix (M, N).
        """
        points = int(points) if points else 4 * self.N
        if points not in self._quadrature:
            x, w = gaussLegendre(0.0, self.L, points)
            self._quadrature[points] = (x, w, self.eigenfunctions(x))
        return self._quadrature[points]

    def synthesize(self, coeffs, x):
        """Pointwise values Σ_k c_k e_k(x) for coefficient arrays of shape (..., N)."""
        return np.asarray(coeffs) @ self.eigenfunctions(x).T

    def project(self, values, points=None):
        """Coefficients of a function sampled at the quadrature nodes; ``values`` has shape (..., M)."""
        _, w, E = self.quadrature(points)
        return (np.asarray(values) * w) @ E


class ModeField():
    """A function on the interval stored by its spectral coefficients."""

    def __init__(self, basis, coeffs):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            coeffs: np.ndarray
                N real coefficients, or N complex ones (u¹ + iu²) for a two component basis.
        """
        dtype = complex if basis.vectorDim == 2 else float
        coeffs = np.array(coeffs, dtype=dtype).reshape(-1)
        if coeffs.shape[0] != basis.N:
            raise BasisMismatchError(f"expected {basis.N} coefficients, got {coeffs.shape[0]}")
        self.basis = basis
        self.coeffs = coeffs

    @property
    def basisId(self):
        return self.basis.basisId

    @staticmethod
    def zeros(basis):
        return ModeField(basis, np.zeros(basis.N))

    @staticmethod
    def unit(basis, k, scale=1.0):
        """The field scale·e_k, with k counted from 1."""
        if not 1 <= k <= basis.N:
            raise DomainError(f"mode index {k} outside 1..{basis.N}")
        coeffs = np.zeros(basis.N, dtype=complex)
        coeffs[k - 1] = scale
        if basis.vectorDim == 1:
            coeffs = coeffs.real
        return ModeField(basis, coeffs)

    def __add__(self, other):
        self.basis.checkSame(other.basis)
        return ModeField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self.basis.checkSame(other.basis)
        return ModeField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return ModeField(self.basis, scalar * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        return f"ModeField({self.basis!r}, {self.coeffs!r})"

    def norm(self, delta=0.0):
        return sobolevNorm(self, delta)


class PhaseState():
    """Position and velocity pair z = (u, v); the velocity is read in H^{δ−1}."""

    def __init__(self, position, velocity=None):
        """Initialize function.

            Parameters
            ----------
            position: ModeField
            velocity: ModeField
                defaults to zero.
        """
        if velocity is None:
            velocity = ModeField.zeros(position.basis)
        position.basis.checkSame(velocity.basis, "velocity")
        self.position = position
        self.velocity = velocity

    @property
    def basis(self):
        return self.position.basis

    @property
    def basisId(self):
        return self.position.basisId

    def __repr__(self):
        return f"PhaseState(u={self.position.coeffs!r}, v={self.velocity.coeffs!r})"


def buildBasis(L=np.pi, N=1, vectorDim=1):
    """Build the Dirichlet basis of [0, L] truncated at N modes.

        Parameters
        ----------
        L: float
            interval length, positive.
        N: int
            number of modes, at least one.
        vectorDim: int
            1 or 2.

        Returns
        -------
        SpectralBasis:
            the basis with α_k = (kπ/L)².
    """
    return SpectralBasis(L, N, vectorDim)


def sobolevNorm(f, delta):
    """Norm of f in H^δ: √(Σ_k α_k^δ |f_k|²)."""
    return float(np.sqrt(np.sum(f.basis.alphas ** delta * np.abs(f.coeffs) ** 2)))


def evaluateField(f, x):
    """Evaluate the field at one point of [0, L].

        Parameters
        ----------
        f: ModeField
        x: float
            point of the interval.

        Returns
        -------
        float or np.ndarray:
            the value, or the pair (u¹, u²) for a two component field.
    """
    L = f.basis.L
    if not 0.0 <= x <= L:
        raise DomainError(f"point {x} outside [0, {L}]")
    if x == 0.0 or x == L:
        return 0.0 if f.basis.vectorDim == 1 else np.zeros(2)
    value = f.basis.synthesize(f.coeffs, [x])[0]
    if f.basis.vectorDim == 2:
        return np.array([value.real, value.imag])
    return float(value)


def phaseInner(z, w, delta=0.0):
    """Inner product of H^δ × H^{δ−1}: Σ α^δ u u' + α^{δ−1} v v'.

        Parameters
        ----------
        z, w: PhaseState
            states on the same basis.
        delta: float
            regularity index.

        Returns
        -------
        float:
            the inner product (real part for two component fields).
    """
    z.basis.checkSame(w.basis, "phase state")
    alphas = z.basis.alphas
    pos = np.sum(alphas ** delta * np.real(np.conj(z.position.coeffs) * w.position.coeffs))
    vel = np.sum(alphas ** (delta - 1.0) * np.real(np.conj(z.velocity.coeffs) * w.velocity.coeffs))
    return float(pos + vel)
