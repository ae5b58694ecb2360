import numpy as np

from skram.interfaces.nonlinearity_interface import NonlinearityInterface
from skram.models.covariance_spec import lambdasOf
from skram.utils.run_report import ConfigurationError


class Collocation():
    """Evaluates pointwise maps through M-point Gauss-Legendre collocation and projects back to modes."""

    def __init__(self, basis, quadraturePoints=None):
        self.x, self.w, self.E = basis.quadrature(quadraturePoints)

    def values(self, u):
        return np.asarray(u) @ self.E.T

    def project(self, values):
        return (values * self.w) @ self.E

    def integrate(self, values):
        return values @ self.w


class ZeroNonlinearity(NonlinearityInterface):
    """B ≡ 0."""
    isGradient = True

    @staticmethod
    def getName():
        return "none"

    def apply(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def jvp(self, u, du):
        return np.zeros_like(np.asarray(du, dtype=float))

    def vjp(self, u, w):
        return np.zeros_like(np.asarray(w, dtype=float))

    def lipschitz(self):
        return 0.0

    def potential(self, u):
        return np.zeros(np.asarray(u).shape[:-1])


class NemytskiiLipschitz(NonlinearityInterface):
    """Pointwise drift b(x, σ) = −L·tanh(σ) + f·sin(πx/ℓ), Lipschitz in σ with constant L."""

    def __init__(self, basis, lipschitz=1.0, forcing=0.0, quadraturePoints=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            lipschitz: float
                Lipschitz constant L, nonnegative.
            forcing: float
                amplitude f of the bounded x dependent part b(·, 0).
            quadraturePoints: int
                collocation points, defaults to 4N.
        """
        super().__init__(basis)
        if lipschitz < 0:
            raise ConfigurationError(f"Lipschitz constant must be nonnegative, got {lipschitz}")
        self.L = float(lipschitz)
        self.forcing = float(forcing)
        self.grid = Collocation(basis, quadraturePoints)
        self.shape = self.forcing * np.sin(np.pi * self.grid.x / basis.L)

    @staticmethod
    def getName():
        return "nemytskii"

    def pointwise(self, sigma):
        return -self.L * np.tanh(sigma) + self.shape

    def apply(self, u):
        return self.grid.project(self.pointwise(self.grid.values(u)))

    def jvp(self, u, du):
        slope = -self.L / np.cosh(self.grid.values(u)) ** 2
        return self.grid.project(slope * self.grid.values(du))

    def vjp(self, u, w):
        return self.jvp(u, w)

    def lipschitz(self):
        return self.L

    def describe(self):
        return {"kind": self.getName(), "lipschitz": self.L, "forcing": self.forcing}


class KleinGordon(NonlinearityInterface):
    """b(σ) = −a|σ|^{λ−1}σ, optionally replaced by b_n(σ) = b(clip(σ, −n, n)).

    b_n agrees with b on [−n, n], is globally Lipschitz and keeps σ·b_n(σ) ≤ 0.
    """

    def __init__(self, basis, a=1.0, growth=3.0, truncation=None, quadraturePoints=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            a: float
                positive amplitude.
            growth: float
                exponent λ with 1 < λ ≤ 3.
            truncation: float
                truncation level n, None for the untruncated drift.
            quadraturePoints: int
                collocation points, defaults to 4N.
        """
        super().__init__(basis)
        if not a > 0:
            raise ConfigurationError(f"Klein-Gordon amplitude must be positive, got a={a}")
        if not 1.0 < growth <= 3.0:
            raise ConfigurationError(f"Klein-Gordon growth must satisfy 1 < λ ≤ 3, got {growth}")
        if truncation is not None and not truncation > 0:
            raise ConfigurationError(f"truncation level must be positive, got n={truncation}")
        self.a = float(a)
        self.growth = float(growth)
        self.truncation = None if truncation is None else float(truncation)
        self.grid = Collocation(basis, quadraturePoints)

    @staticmethod
    def getName():
        return "klein_gordon"

    def truncated(self, n):
        """The same drift truncated at level n."""
        return KleinGordon(self.basis, self.a, self.growth, n, self.grid.x.size)

    def _clip(self, sigma):
        if self.truncation is None:
            return sigma
        return np.clip(sigma, -self.truncation, self.truncation)

    def pointwise(self, sigma):
        s = self._clip(sigma)
        return -self.a * np.abs(s) ** (self.growth - 1.0) * s

    def derivative(self, sigma):
        slope = -self.a * self.growth * np.abs(self._clip(sigma)) ** (self.growth - 1.0)
        if self.truncation is not None:
            slope = np.where(np.abs(sigma) > self.truncation, 0.0, slope)
        return slope

    def apply(self, u):
        return self.grid.project(self.pointwise(self.grid.values(u)))

    def jvp(self, u, du):
        return self.grid.project(self.derivative(self.grid.values(u)) * self.grid.values(du))

    def vjp(self, u, w):
        return self.jvp(u, w)

    def lipschitz(self):
        if self.truncation is None:
            return float("inf")
        return self.a * self.growth * self.truncation ** (self.growth - 1.0)

    def describe(self):
        return {"kind": self.getName(), "a": self.a, "growth": self.growth, "truncation": self.truncation}


class GradientType(NonlinearityInterface):
    """B(h) = −Q²DF(h) for a nonnegative potential with F(0) = 0.

    ``quadratic``: F(h) = (κ/2)|h|²_H. ``logcosh``: F(h) = κ∫ log cosh h(x) dx. Both have DF Lipschitz
    with constant κ.
    """
    isGradient = True
    potentials = ("quadratic", "logcosh")

    def __init__(self, basis, covariance, potential="quadratic", kappa=1.0, quadraturePoints=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            covariance: CovarianceSpec
                gives the λ_k of Q² in B = −Q²DF.
            potential: str
                ``quadratic`` or ``logcosh``.
            kappa: float
                Lipschitz constant of DF, nonnegative.
        """
        super().__init__(basis)
        if potential not in GradientType.potentials:
            raise ConfigurationError(f"potential must be one of {GradientType.potentials}, got {potential!r}")
        if kappa < 0:
            raise ConfigurationError(f"kappa must be nonnegative, got {kappa}")
        self.covariance = covariance
        self.kind = potential
        self.kappa = float(kappa)
        self.lambdas = lambdasOf(covariance, basis)
        self.grid = Collocation(basis, quadraturePoints)

    @staticmethod
    def getName():
        return "gradient"

    def potential(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self.kappa * np.sum(u * u, axis=-1)
        values = self.grid.values(u)
        logCosh = np.logaddexp(values, -values) - np.log(2.0)
        return self.kappa * self.grid.integrate(logCosh)

    def gradient(self, u):
        """DF(u) in mode coordinates."""
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            return self.kappa * u
        return self.kappa * self.grid.project(np.tanh(self.grid.values(u)))

    def hessianVector(self, u, du):
        if self.kind == "quadratic":
            return self.kappa * np.asarray(du, dtype=float)
        sech2 = 1.0 / np.cosh(self.grid.values(u)) ** 2
        return self.kappa * self.grid.project(sech2 * self.grid.values(du))

    def apply(self, u):
        return -self.lambdas ** 2 * self.gradient(u)

    def jvp(self, u, du):
        return -self.lambdas ** 2 * self.hessianVector(u, du)

    def vjp(self, u, w):
        return self.hessianVector(u, -self.lambdas ** 2 * np.asarray(w, dtype=float))

    def lipschitz(self):
        return self.kappa * float(np.max(self.lambdas ** 2))

    def describe(self):
        return {"kind": self.getName(), "potential": self.kind, "kappa": self.kappa}


class ModeLipschitz(NonlinearityInterface):
    """Non-gradient map B(u) = γ₀·M·tanh(u)/‖M‖₂ with M = −I + S and S the skew tridiagonal coupling of
    neighbouring modes. B(0) = 0 and the Lipschitz constant is γ₀."""

    def __init__(self, basis, gamma0=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            gamma0: float
                Lipschitz constant, must stay below α₁; defaults to 0.3·α₁.
        """
        super().__init__(basis)
        alpha1 = basis.alphas[0]
        self.gamma0 = 0.3 * alpha1 if gamma0 is None else float(gamma0)
        if not 0.0 <= self.gamma0 < alpha1:
            raise ConfigurationError(f"gamma0 must satisfy 0 ≤ γ₀ < α₁ = {alpha1}, got {self.gamma0}")
        N = basis.N
        skew = np.diag(np.ones(N - 1), 1) - np.diag(np.ones(N - 1), -1)
        self.M = -np.eye(N) + skew
        self.scale = self.gamma0 / np.linalg.norm(self.M, 2)

    @staticmethod
    def getName():
        return "mode_lipschitz"

    def apply(self, u):
        return self.scale * np.tanh(u) @ self.M.T

    def jvp(self, u, du):
        return self.scale * (np.asarray(du) / np.cosh(u) ** 2) @ self.M.T

    def vjp(self, u, w):
        return self.scale * (np.asarray(w) @ self.M) / np.cosh(u) ** 2

    def lipschitz(self):
        return self.gamma0

    def describe(self):
        return {"kind": self.getName(), "gamma0": self.gamma0}


class NoiseCoefficient():
    """Pointwise multiplicative noise coefficient g(σ) on the d = 1 interval.

    ``bounded``: g = g₀ + g₁·sin σ. ``lipschitz``: g = g₀ + g₁·σ.
    """
    kinds = ("bounded", "lipschitz")

    def __init__(self, basis, kind="bounded", g0=1.0, g1=0.5, quadraturePoints=None):
        if kind not in NoiseCoefficient.kinds:
            raise ConfigurationError(f"noise coefficient kind must be one of {NoiseCoefficient.kinds}, got {kind!r}")
        if basis.vectorDim != 1:
            raise ConfigurationError("multiplicative noise is only available for scalar fields")
        self.basis = basis
        self.kind = kind
        self.g0 = float(g0)
        self.g1 = float(g1)
        self.grid = Collocation(basis, quadraturePoints)

    def pointwise(self, sigma):
        if self.kind == "bounded":
            return self.g0 + self.g1 * np.sin(sigma)
        return self.g0 + self.g1 * sigma

    def isBounded(self):
        return self.kind == "bounded"

    def flags(self):
        """Hypothesis flags of the coefficient, see ``skram.utils.hypotheses``."""
        return {"bounded_noise_coefficient": self.isBounded()}

    def lipschitz(self):
        return abs(self.g1)

    def modeMatrix(self, u, lambdas):
        """ Matrix G_kj = λ_j ∫ g(u(x)) e_j(x) e_k(x) dx of the noise acting on mode k through β_j.

            Parameters
            ----------
            u: np.ndarray
                coefficients, shape (P, N).
            lambdas: np.ndarray
                noise eigenvalues.

            Returns
            -------
            np.ndarray:
                shape (P, N, N).
        """
        g = self.pointwise(self.grid.values(u)) * self.grid.w
        return np.einsum("pm,mk,mj->pkj", g, self.grid.E, self.grid.E) * lambdas

    def describe(self):
        return {"kind": self.kind, "g0": self.g0, "g1": self.g1}


def installNonlinearities():
    """Create a dictionary of the implemented nonlinearities"""
    return {sub_clz.getName(): sub_clz for sub_clz in NonlinearityInterface.__subclasses__()}


def makeNonlinearity(kind, basis, covariance=None, quadraturePoints=None, **params):
    """ Build a nonlinearity by name.

        Parameters
        ----------
        kind: str
            one of ``none``, ``nemytskii``, ``klein_gordon``, ``gradient``, ``mode_lipschitz``.
        basis: SpectralBasis
        covariance: CovarianceSpec
            required by ``gradient``.
        params: dict
            constructor parameters of the chosen family.

        Returns
        -------
        NonlinearityInterface
    """
    registry = installNonlinearities()
    if kind not in registry:
        raise ConfigurationError(f"unknown nonlinearity {kind!r}, valid names are {sorted(registry)}")
    if kind == "none":
        return ZeroNonlinearity(basis)
    if kind == "nemytskii":
        return NemytskiiLipschitz(basis, quadraturePoints=quadraturePoints, **params)
    if kind == "klein_gordon":
        return KleinGordon(basis, quadraturePoints=quadraturePoints, **params)
    if kind == "gradient":
        if covariance is None:
            raise ConfigurationError("a gradient nonlinearity needs the noise covariance")
        return GradientType(basis, covariance, quadraturePoints=quadraturePoints, **params)
    return ModeLipschitz(basis, **params)
