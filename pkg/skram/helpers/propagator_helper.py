import numpy as np
from loguru import logger

from skram.models.mode_coeffs import MagneticModeCoeffs, WaveModeCoeffs
from skram.models.spectral_basis import ModeField, PhaseState
from skram.utils.run_report import InvalidParameterError
from skram.utils.skram_config import SkramConfig
from skram.utils.utils import compositeGaussLegendre


def _checkMass(mu):
    if not np.isfinite(mu) or mu <= 0:
        raise InvalidParameterError(f"mass must be positive, got mu={mu}")


def _checkTime(t):
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError(f"time must be nonnegative, got t={t}")


def waveEntries(mu, alpha, t):
    """Entries of the damped wave mode propagator without argument checks.

        Valid for any real t. Every exponential is written as exp((−1/2μ ± γ)t) so that no exponent is
        positive for t ≥ 0.

        Parameters
        ----------
        mu: float
            mass.
        alpha: np.ndarray
            eigenvalues; broadcast against ``t``.
        t: np.ndarray
            times.

        Returns
        -------
        WaveModeCoeffs
    """
    alpha, t = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(t, dtype=float))
    a = 0.5 / mu
    disc = 1.0 - 4.0 * alpha * mu
    tol = SkramConfig.branch_tolerance
    over = disc > tol
    under = disc < -tol
    crit = ~(over | under)
    root = a * np.sqrt(np.abs(disc))

    C = np.empty(alpha.shape)
    S = np.empty(alpha.shape)
    if np.any(over):
        g, tt = root[over], t[over]
        grow = np.exp((-a + g) * tt)
        C[over] = 0.5 * (grow + np.exp((-a - g) * tt))
        S[over] = -grow * np.expm1(-2.0 * g * tt) / (2.0 * g)
    if np.any(under):
        w, tt = root[under], t[under]
        decay = np.exp(-a * tt)
        C[under] = decay * np.cos(w * tt)
        S[under] = decay * np.sin(w * tt) / w
    if np.any(crit):
        tt = t[crit]
        decay = np.exp(-a * tt)
        C[crit] = decay
        S[crit] = tt * decay

    branch = np.where(over, "overdamped", np.where(under, "underdamped", "critical"))
    if branch.ndim == 0:
        branch = str(branch)
    return WaveModeCoeffs(C + a * S, S, -(alpha / mu) * S, C - a * S, branch)


def waveModePropagator(mu, alpha, t):
    """Exact propagator of one damped wave mode μu'' + u' + αu = 0.

        Parameters
        ----------
        mu: float
            mass, positive.
        alpha: float or np.ndarray
            eigenvalue(s), positive.
        t: float or np.ndarray
            time(s), nonnegative.

        Returns
        -------
        WaveModeCoeffs:
            identity at t = 0, determinant exp(−t/μ).
    """
    _checkMass(mu)
    _checkTime(t)
    if np.any(np.asarray(alpha) <= 0):
        raise InvalidParameterError(f"eigenvalue must be positive, got alpha={alpha}")
    return waveEntries(mu, alpha, t)


def waveGroupApply(basis, mu, t, z):
    """Apply the damped wave group S_μ(t) mode by mode; t may be any real number."""
    _checkMass(mu)
    basis.checkSame(z.basis, "phase state")
    c = waveEntries(mu, basis.alphas, t)
    u, v = c.apply(z.position.coeffs, z.velocity.coeffs)
    return PhaseState(ModeField(basis, u), ModeField(basis, v))


def waveGroupAdjointApply(basis, mu, t, z):
    """Apply the adjoint group S*_μ(t)(u, v) = (Π₁S_μ(t)(u, −v/μ), Π₂S_μ(t)(−μu, v)).

        The adjoint is taken in the energy inner product of H^δ × H^{δ−1} (see ``phaseInner``).
    """
    _checkMass(mu)
    basis.checkSame(z.basis, "phase state")
    c = waveEntries(mu, basis.alphas, t)
    u, v = z.position.coeffs, z.velocity.coeffs
    first = c.fu * u - c.fv * v / mu
    second = -mu * c.gu * u + c.gv * v
    return PhaseState(ModeField(basis, first), ModeField(basis, second))


def heatModeDecay(alpha, t):
    """Mode factor e^{−αt} of the heat semigroup."""
    _checkTime(t)
    return np.exp(-np.asarray(alpha, dtype=float) * np.asarray(t, dtype=float))


def magneticModePropagator(mu, eps, alpha, t):
    """Exact propagator of one magnetic mode μw'' = −αw − (ε − i)w'.

        Parameters
        ----------
        mu: float
            mass, positive.
        eps: float
            friction, nonnegative; ε = 0 is the undamped rotation.
        alpha: float or np.ndarray
            eigenvalue(s).
        t: float or np.ndarray
            time(s), nonnegative.

        Returns
        -------
        MagneticModeCoeffs
    """
    _checkMass(mu)
    _checkTime(t)
    if eps < 0:
        raise InvalidParameterError(f"friction must be nonnegative, got eps={eps}")
    return magneticEntries(mu, eps, alpha, t)


def magneticEntries(mu, eps, alpha, t):
    """Entries of the magnetic propagator without argument checks, broadcast over ``alpha`` and ``t``."""
    alpha, t = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(t, dtype=float))
    c = eps - 1j
    disc = c * c - 4.0 * mu * alpha
    root = np.sqrt(np.asarray(disc, dtype=complex))
    rp = (-c + root) / (2.0 * mu)
    rm = (-c - root) / (2.0 * mu)
    double = np.abs(disc) < SkramConfig.branch_tolerance
    ep = np.exp(rp * t)
    em = np.exp(rm * t)
    span = np.where(double, 1.0, rp - rm)
    a11 = np.array((rp * em - rm * ep) / span)
    a12 = np.array((ep - em) / span)
    a21 = np.array(rp * rm * (em - ep) / span)
    a22 = np.array((rp * ep - rm * em) / span)
    if np.any(double):
        r0 = -c / (2.0 * mu)
        e0 = np.exp(r0 * t[double])
        tt = t[double]
        a11[double] = e0 * (1.0 - r0 * tt)
        a12[double] = e0 * tt
        a21[double] = -e0 * r0 * r0 * tt
        a22[double] = e0 * (1.0 + r0 * tt)
    return MagneticModeCoeffs(a11, a12, a21, a22, mu, eps)


def rotatedHeatMode(eps, alpha, t):
    """Mode factor exp(−α(ε + i)t/(1 + ε²)) of the rotated heat semigroup T_ε(t)."""
    _checkTime(t)
    if eps < 0:
        raise InvalidParameterError(f"friction must be nonnegative, got eps={eps}")
    return np.exp(-np.asarray(alpha, dtype=float) * (eps + 1j) * np.asarray(t, dtype=float) / (1.0 + eps * eps))


def energyNorm(mu, alphas, t):
    """Operator norm of S_μ(t) on H × H^{−1}, maximized over the given eigenvalues."""
    m = waveEntries(mu, alphas, t).matrix()
    scale = np.sqrt(np.asarray(alphas, dtype=float))
    # conjugate by diag(1, α^{-1/2})
    m = m.copy()
    m[..., 0, 1] *= scale
    m[..., 1, 0] /= scale
    return float(np.max(np.linalg.norm(m, ord=2, axis=(-2, -1))))


def estimateNegativeType(mu, alphas, times):
    """Fit constants with ‖S_μ(t)‖ ≤ M·e^{−ωt} in the energy norm over a time grid.

        Parameters
        ----------
        mu: float
        alphas: np.ndarray
            eigenvalues of the truncation.
        times: np.ndarray
            sampling times.

        Returns
        -------
        (float, float):
            M and ω; ω is the decay rate of the fitted envelope.
    """
    _checkMass(mu)
    times = np.asarray(times, dtype=float)
    norms = np.array([energyNorm(mu, alphas, t) for t in times])
    slope, _ = np.polyfit(times, np.log(norms), 1)
    omega = -slope
    M = float(np.max(norms * np.exp(omega * times)))
    logger.debug(f"negative type fit for mu={mu}: M={M:.4g}, omega={omega:.4g}")
    return M, float(omega)


def kernelEnergyRatio(mu, alpha, t):
    """∫₀^t |f_μ(s; 0, 1)|² ds divided by μ²/α; bounded uniformly in μ and α."""
    _checkMass(mu)
    _checkTime(t)
    integral = compositeGaussLegendre(lambda s: waveEntries(mu, alpha, s).fv ** 2, 0.0, t, rtol=1e-10)
    return float(integral) * alpha / (mu * mu)
