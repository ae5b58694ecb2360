import numpy as np

from skram.helpers.mode_systems import WaveModeSystem
from skram.utils.run_report import ConfigurationError, InternalError, InvalidParameterError
from skram.utils.skram_config import SkramConfig
from skram.utils.utils import compositeGaussLegendre


def sampleIncrements(stream, h, N, nPaths=None):
    """Brownian increments of N independent modes over one step; advances the stream counter.

        Parameters
        ----------
        stream: NoiseStream
        h: float
            step, positive.
        N: int
            number of modes.
        nPaths: int
            when given, draws an (nPaths, N) ensemble whose row j is path j.

        Returns
        -------
        np.ndarray:
            N(0, h) entries.
    """
    if not h > 0:
        raise InvalidParameterError(f"step must be positive, got h={h}")
    shape = (N,) if nPaths is None else (nPaths, N)
    draw = np.sqrt(h) * stream.normals(stream.counter, shape)
    stream.counter += 1
    return draw


def jointStepCovariance(systems, h, rtol=None):
    """Covariance of the exact one-step noise of several systems driven by the same Brownian motions.

        Per mode the joint vector is (ΔW, ξ_1, ..., ξ_m), where ΔW collects the ``noiseDim`` Brownian
        increments over [0, h] and ξ_i = ∫₀^h Φ_i(h − s) Inj_i dW(s). Its covariance is the integral of
        K(σ)K(σ)ᵀ over [0, h] with K = [I; Φ_1 Inj_1; ...], computed for unit noise intensity.

        Parameters
        ----------
        systems: list[ModeSystemInterface]
            systems sharing one basis and one noise dimension.
        h: float
            step.

        Returns
        -------
        np.ndarray:
            shape (N, n, n) with n = noiseDim + Σ stateDim.
    """
    nb = systems[0].noiseDim
    if any(s.noiseDim != nb for s in systems):
        raise ConfigurationError("coupled systems must be driven by the same number of Brownian motions")
    N = systems[0].alphas.size
    rtol = SkramConfig.quadrature_tolerance if rtol is None else rtol

    def integrand(sigma):
        eye = np.broadcast_to(np.eye(nb), (sigma.size, N, nb, nb))
        K = np.concatenate([eye] + [s.kernel(sigma) for s in systems], axis=-2)
        return np.einsum("snac,snbc->snab", K, K)

    cov = compositeGaussLegendre(integrand, 0.0, h, rtol=rtol)
    return 0.5 * (cov + np.swapaxes(cov, -1, -2))


def crossModeStepCovariance(systems, h, rtol=None):
    """Covariance of the one-step noise of every mode driven by a single scalar Brownian motion.

        Multiplicative noise couples the modes: the Brownian motion β_j enters mode n with weight G_nj, so
        the convolutions of different modes driven by β_j are correlated through ∫₀^h K_n(σ)K_m(σ)ᵀ dσ. The
        components are ordered (mode, slot) with the slots of ``jointStepCovariance``.

        Parameters
        ----------
        systems: list[ModeSystemInterface]
            systems with scalar noise sharing one basis.
        h: float
            step.

        Returns
        -------
        np.ndarray:
            shape (N·n, N·n) with n = 1 + Σ stateDim.
    """
    if any(s.noiseDim != 1 for s in systems):
        raise ConfigurationError("cross mode covariances need systems driven by scalar Brownian motions")
    N = systems[0].alphas.size
    rtol = SkramConfig.quadrature_tolerance if rtol is None else rtol

    def integrand(sigma):
        ones = np.ones((sigma.size, N, 1, 1))
        K = np.concatenate([ones] + [s.kernel(sigma) for s in systems], axis=-2)
        flat = K.reshape(sigma.size, -1)
        return np.einsum("sa,sb->sab", flat, flat)

    cov = compositeGaussLegendre(integrand, 0.0, h, rtol=rtol)
    return 0.5 * (cov + cov.T)


def semidefiniteCholesky(cov):
    """Lower triangular factors of a stack of positive semidefinite matrices.

        Pivots below ``pivot_tolerance`` times the largest diagonal entry give zero columns, so exactly
        dependent components share their factor rows.

        Parameters
        ----------
        cov: np.ndarray
            shape (N, n, n).

        Returns
        -------
        np.ndarray:
            L of shape (N, n, n) with L Lᵀ = cov up to the pivot tolerance.
    """
    cov = np.asarray(cov, dtype=float)
    N, n, _ = cov.shape
    L = np.zeros_like(cov)
    scale = np.max(np.abs(np.diagonal(cov, axis1=1, axis2=2)), axis=1)
    tol = SkramConfig.pivot_tolerance * np.where(scale > 0, scale, 1.0)
    for j in range(n):
        d = cov[:, j, j] - np.sum(L[:, j, :j] ** 2, axis=1)
        if np.any(d < -1e3 * tol):
            bad = np.flatnonzero(d < -1e3 * tol)
            raise InternalError(f"step covariance is not positive semidefinite on modes {bad.tolist()}")
        keep = d > tol
        root = np.sqrt(np.where(keep, d, 1.0))
        L[:, j, j] = np.where(keep, root, 0.0)
        if j + 1 < n:
            off = cov[:, j + 1:, j] - np.einsum("nik,nk->ni", L[:, j + 1:, :j], L[:, j, :j])
            L[:, j + 1:, j] = np.where(keep[:, None], off / root[:, None], 0.0)
    return L


def checkPositive(cov, what):
    """Raise an internal error when a symmetric matrix has a clearly negative eigenvalue."""
    eig = np.linalg.eigvalsh(cov)
    scale = max(np.max(np.abs(eig)), np.finfo(float).tiny)
    if np.min(eig) < -1e-12 * max(scale, 1.0):
        raise InternalError(f"{what} is not positive semidefinite, eigenvalues {eig}")


def waveConvolutionStepCov(mu, alpha, lam, h):
    """Covariance of the exact one-step increment of the pair (η_k, θ_k) of the wave convolution.

        Parameters
        ----------
        mu, alpha, lam, h: float
            mass, eigenvalue, noise intensity and step, all positive.

        Returns
        -------
        np.ndarray:
            the 2×2 matrix (λ/μ)² ∫₀^h Φ(s) e₂ e₂ᵀ Φ(s)ᵀ ds.
    """
    if min(mu, alpha, h) <= 0 or lam < 0:
        raise InvalidParameterError(f"parameters must be positive, got mu={mu}, alpha={alpha}, lambda={lam}, h={h}")
    system = WaveModeSystem(np.array([alpha]), mu)
    joint = jointStepCovariance([system], h)[0]
    cov = lam * lam * joint[1:, 1:]
    checkPositive(cov, "wave step covariance")
    return cov


def heatConvolutionStepVar(alpha, lam, h):
    """Variance λ²(1 − e^{−2αh})/(2α) of the exact Ornstein-Uhlenbeck step."""
    if alpha <= 0 or h < 0:
        raise InvalidParameterError(f"invalid parameters alpha={alpha}, h={h}")
    return float(-lam * lam * np.expm1(-2.0 * alpha * h) / (2.0 * alpha))

