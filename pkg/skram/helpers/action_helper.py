import numpy as np
import scipy.sparse as sp
from loguru import logger
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from skram.models.covariance_spec import lambdasOf
from skram.models.discrete_path import DiscretePath, QuasiPotentialResult, geometricGrid, velocityStencil
from skram.models.spectral_basis import ModeField
from skram.utils.run_report import ConfigurationError, DomainError, InternalError
from skram.utils.skram_config import SkramConfig
from skram.utils.thread_manager import PathPool


def _coeffs(field, basis):
    if field is None:
        return np.zeros(basis.N)
    if isinstance(field, ModeField):
        basis.checkSame(field.basis)
        return np.asarray(field.coeffs, dtype=float)
    return np.asarray(field, dtype=float).reshape(basis.N)


def gradientQuasipotential(u, v, mu, F, covariance, basis=None):
    """ Quasi-potential Σ α_k u_k²/λ_k² + 2F(u) + μ Σ v_k²/λ_k² of a gradient system.

        Parameters
        ----------
        u, v: ModeField or np.ndarray
            position and velocity; v may be None.
        mu: float
            mass, 0 for the heat equation.
        F: NonlinearityInterface or callable
            gradient drift or potential; None for F ≡ 0.
        covariance: CovarianceSpec or np.ndarray
        basis: SpectralBasis
            needed when u is an array.

        Returns
        -------
        float
    """
    basis = u.basis if isinstance(u, ModeField) else basis
    if basis is None:
        raise ConfigurationError("a basis is needed for coefficient arrays")
    uc, vc = _coeffs(u, basis), _coeffs(v, basis)
    lambdas = lambdasOf(covariance, basis)
    zero = lambdas == 0
    if np.any(zero & ((uc != 0) | (vc != 0))):
        raise DomainError(f"coefficients on modes {np.flatnonzero(zero & ((uc != 0) | (vc != 0))) + 1} are outside "
                          f"the range of Q")
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, lambdas) ** 2)
    value = np.sum(basis.alphas * uc * uc * inv) + mu * np.sum(vc * vc * inv)
    if F is not None:
        potential = F.potential if hasattr(F, "potential") else F
        value += 2.0 * float(potential(uc))
    return float(value)


class ActionProblem():
    """ Discrete action of the skeleton equations on a fixed grid.

    On interval n with step h_n the heat control is ρ_n = Q⁻¹(δφ_n/h_n + Aφ_{n+½} − B(φ_{n+½})) with
    midpoint averaging, and the wave control adds μQ⁻¹a_n with a_n = (v_{n+1} − v_n)/h_n computed from the
    node velocities. The action is ½Σ h_n |ρ_n + μQ⁻¹a_n|²_H.
    """

    def __init__(self, basis, times, nonlinearity, covariance, mu=0.0, terminalVelocity=None, velocities=None):
        """Initialize function.

            Parameters
            ----------
            basis: SpectralBasis
            times: np.ndarray
                path nodes.
            nonlinearity: NonlinearityInterface
            covariance: CovarianceSpec or np.ndarray
                all λ_k must be positive.
            mu: float
                mass, 0 for the heat action.
            terminalVelocity: np.ndarray
                prescribed velocity at t = 0, otherwise the stencil value.
            velocities: np.ndarray
                node velocities fixed from outside; only for evaluating a given path.
        """
        self.basis = basis
        self.times = np.asarray(times, dtype=float)
        self.nonlinearity = nonlinearity
        self.mu = float(mu)
        self.lambdas = lambdasOf(covariance, basis)
        if np.any(self.lambdas <= 0):
            raise DomainError("the action needs Q to be invertible on every mode")
        self.h = np.diff(self.times)
        self.M = self.h.size
        self.N = basis.N
        self.fixedVelocities = velocities
        Dv = velocityStencil(self.times).tolil()
        self.accelConst = np.zeros((self.M, self.N))
        if terminalVelocity is not None:
            Dv[self.M, :] = 0.0
            self.accelConst[-1] = np.asarray(terminalVelocity, dtype=float) / self.h[-1]
        self.Dv = Dv.tocsr()
        self.Da = (sp.diags(1.0 / self.h) @ (self.Dv[1:] - self.Dv[:-1])).tocsr()
        eye = sp.identity(self.N, format="csr")
        diff = sp.diags([-1.0 / self.h, 1.0 / self.h], [0, 1], shape=(self.M, self.M + 1))
        avg = sp.diags([0.5 * np.ones(self.M), 0.5 * np.ones(self.M)], [0, 1], shape=(self.M, self.M + 1))
        self.linear = (sp.kron(diff, eye) + sp.kron(avg, sp.diags(basis.alphas))).tocsr()
        self.accel = sp.kron(self.Da, eye).tocsr()
        self.scale = np.sqrt(self.h)[:, None] / self.lambdas

    def midpoints(self, phi):
        return 0.5 * (phi[1:] + phi[:-1])

    def parts(self, phi):
        """ Heat control and acceleration term of every interval.

            Parameters
            ----------
            phi: np.ndarray
                node positions, shape (M + 1, N).

            Returns
            -------
            (np.ndarray, np.ndarray):
                Q⁻¹ times the heat residual and Q⁻¹a, both (M, N).
        """
        mid = self.midpoints(phi)
        heat = ((phi[1:] - phi[:-1]) / self.h[:, None] + self.basis.alphas * mid - self.nonlinearity.apply(mid))
        if self.fixedVelocities is not None:
            accel = np.diff(self.fixedVelocities, axis=0) / self.h[:, None]
        else:
            accel = self.Da @ phi + self.accelConst
        return heat / self.lambdas, accel / self.lambdas

    def residual(self, phi):
        heat, accel = self.parts(phi)
        return (np.sqrt(self.h)[:, None] * (heat + self.mu * accel)).ravel()

    def value(self, phi):
        r = self.residual(phi)
        return 0.5 * float(r @ r)

    def jacobian(self, phi):
        """Sparse Jacobian of ``residual`` with respect to all node positions, shape (M·N, (M+1)·N)."""
        mid = self.midpoints(phi)
        DB = self.nonlinearity.jacobian(mid)
        blocks = np.repeat(-0.5 * DB, 2, axis=0)
        indices = np.ravel(np.column_stack([np.arange(self.M), np.arange(1, self.M + 1)]))
        indptr = np.arange(0, 2 * self.M + 1, 2)
        drift = sp.bsr_matrix((blocks, indices, indptr), shape=(self.M * self.N, (self.M + 1) * self.N))
        operator = self.linear + drift + self.mu * self.accel
        return sp.diags(self.scale.ravel()) @ operator


def _problem(path, nonlinearity, covariance, mu=0.0, terminalVelocity=None):
    return ActionProblem(path.basis, path.times, nonlinearity, covariance, mu, terminalVelocity, path.velocities)


def actionHeat(path, nonlinearity, covariance):
    """ Discrete heat action ½ Σ h_n |Q⁻¹(δφ_n/h_n − Δφ_{n+½} − B(φ_{n+½}))|²_H.

        Parameters
        ----------
        path: DiscretePath
        nonlinearity: NonlinearityInterface
        covariance: CovarianceSpec or np.ndarray

        Returns
        -------
        float
    """
    return _problem(path, nonlinearity, covariance).value(path.fields)


def actionWave(path, mu, nonlinearity, covariance, terminalVelocity=None):
    """Discrete wave action ½ Σ h_n |Q⁻¹(μa_n + δφ_n/h_n − Δφ_{n+½} − B(φ_{n+½}))|²_H."""
    if mu < 0:
        raise ConfigurationError(f"mass must be nonnegative, got mu={mu}")
    return _problem(path, nonlinearity, covariance, mu, terminalVelocity).value(path.fields)


def actionDecomposition(path, mu, nonlinearity, covariance, terminalVelocity=None):
    """ Split the wave action into the heat action and the mass dependent remainder.

        Parameters
        ----------
        path: DiscretePath
        mu: float
        nonlinearity: NonlinearityInterface
        covariance: CovarianceSpec or np.ndarray

        Returns
        -------
        (float, float):
            I_heat and μΣh⟨ρ, Q⁻¹a⟩ + ½μ²Σh|Q⁻¹a|², summing to ``actionWave``.
    """
    heat, accel = _problem(path, nonlinearity, covariance, mu, terminalVelocity).parts(path.fields)
    h = path.steps[:, None]
    heatAction = 0.5 * float(np.sum(h * heat * heat))
    remainder = mu * float(np.sum(h * heat * accel)) + 0.5 * mu * mu * float(np.sum(h * accel * accel))
    return heatAction, remainder


def actionGradient(path, mu, nonlinearity, covariance, terminalVelocity=None):
    """Gradient of the discrete action with respect to every node position, shape (M + 1, N)."""
    if path.velocities is not None:
        raise ConfigurationError("the gradient is defined for paths whose velocities come from the stencil")
    problem = _problem(path, nonlinearity, covariance, mu, terminalVelocity)
    r = problem.residual(path.fields)
    return (problem.jacobian(path.fields).T @ r).reshape(path.fields.shape)


def reversedFlowPath(basis, endpoint, times, nonlinearity):
    """ Initial path φ(t) = ψ(−t) with ψ the dissipative flow ψ' = Δψ + B(ψ) started at the endpoint.

        In the linear and gradient heat cases this is the minimizer of the action.
    """
    u = _coeffs(endpoint, basis)
    T = -times[0]

    def rhs(s, y):
        return -basis.alphas * y + nonlinearity.apply(y)

    sol = solve_ivp(rhs, (0.0, T), u, method="BDF", t_eval=-times[::-1], rtol=1e-9, atol=1e-14)
    if not sol.success:
        logger.warning(f"reversed flow integration failed: {sol.message}; starting from a linear decay")
        return np.exp(np.outer(times, basis.alphas)) * u
    fields = sol.y.T[::-1].copy()
    fields[-1] = u
    return fields


def _penalty(problem, weight):
    """Rows and Jacobian pulling the start node (and its velocity) to zero with the given weight."""
    N = problem.N
    alphas, lambdas = problem.basis.alphas, problem.lambdas
    position = sp.kron(sp.csr_matrix(([1.0], ([0], [0])), shape=(1, problem.M + 1)),
                       sp.diags(np.sqrt(2.0 * weight * alphas) / lambdas), format="csr")
    blocks = [position]
    if problem.mu > 0:
        blocks.append(sp.kron(problem.Dv[0:1], sp.diags(np.sqrt(2.0 * weight * problem.mu) / lambdas), format="csr"))
    return sp.vstack(blocks).tocsr()


def minimizeAction(endpoint, basis, nonlinearity, covariance, mode="heat", mu=None, endpointVelocity=None, T=12.0,
                   M=400, init=None, growth=20.0, tol=None, maxIterations=None):
    """ Minimum action path ending at a given position.

        The interior nodes and the start node are free, the endpoint is fixed. The start node (and for the
        wave action its velocity) is pulled to zero by a quadratic penalty whose weight is
        ``SkramConfig.start_penalty`` times the quasi-potential of the start node. The descent direction
        solves the Gauss-Newton system of the least squares form of the action, the step is chosen by
        Armijo backtracking, and the iteration stops when |∇| < tol·(1 + value).

        Parameters
        ----------
        endpoint: ModeField or np.ndarray
            position at t = 0.
        basis: SpectralBasis
        nonlinearity: NonlinearityInterface
        covariance: CovarianceSpec or np.ndarray
        mode: str
            ``heat`` or ``wave``.
        mu: float
            mass of the wave action.
        endpointVelocity: ModeField or np.ndarray
            prescribed velocity at t = 0; free when None.
        T: float
            horizon of the truncated interval [−T, 0].
        M: int
            number of intervals of the geometric grid.
        init: DiscretePath
            starting path; its grid replaces (T, M). Defaults to the reversed dissipative flow.

        Returns
        -------
        QuasiPotentialResult
    """
    if mode not in ("heat", "wave"):
        raise ConfigurationError(f"mode must be heat or wave, got {mode!r}")
    if mode == "wave" and (mu is None or not mu > 0):
        raise ConfigurationError(f"the wave action needs a positive mass, got mu={mu}")
    mu = float(mu) if mode == "wave" else 0.0
    tol = SkramConfig.action_tolerance if tol is None else tol
    maxIterations = SkramConfig.action_max_iterations if maxIterations is None else maxIterations
    u = _coeffs(endpoint, basis)
    v = None if endpointVelocity is None or mode == "heat" else _coeffs(endpointVelocity, basis)
    times = init.times if init is not None else geometricGrid(T, M, growth)

    if not np.any(u) and (v is None or not np.any(v)):
        path = DiscretePath(basis, times, np.zeros((times.size, basis.N)))
        return QuasiPotentialResult(0.0, path, True, 0.0, 0)

    problem = ActionProblem(basis, times, nonlinearity, covariance, mu, v)
    penaltyJac = _penalty(problem, SkramConfig.start_penalty)
    phi = np.array(init.fields if init is not None else reversedFlowPath(basis, u, times, nonlinearity), dtype=float)
    phi[-1] = u
    free = problem.M * problem.N

    def objective(x):
        r = problem.residual(x)
        p = penaltyJac @ x.ravel()
        return 0.5 * float(r @ r) + 0.5 * float(p @ p), r, p

    value, r, p = objective(phi)
    gnorm = np.inf
    converged = False
    it = 0
    for it in range(1, maxIterations + 1):
        J = sp.vstack([problem.jacobian(phi), penaltyJac]).tocsr()[:, :free]
        res = np.concatenate([r, p])
        g = J.T @ res
        gnorm = float(np.linalg.norm(g))
        if gnorm < tol * (1.0 + value):
            converged = True
            break
        H = (J.T @ J).tocsc()
        damping = 1e-12 * max(1.0, float(H.diagonal().max()))
        direction = spsolve(H + damping * sp.identity(free, format="csc"), -g)
        slope = float(g @ direction)
        if not np.all(np.isfinite(direction)) or slope >= 0:
            direction = -g
            slope = -gnorm * gnorm
        t = 1.0
        while True:
            trial = phi.copy()
            trial[:-1] += t * direction.reshape(problem.M, problem.N)
            trialValue, trialR, trialP = objective(trial)
            if trialValue <= value + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                break
        if t < 1e-14:
            logger.debug(f"line search stalled at iteration {it}, value {value:.10g}, |g| {gnorm:.3g}")
            break
        if trialValue > value:
            raise InternalError(f"action increased from {value} to {trialValue} at iteration {it}")
        phi, value, r, p = trial, trialValue, trialR, trialP
        logger.debug(f"action iteration {it}: value {value:.10g}, |g| {gnorm:.3g}, step {t:.3g}")

    path = DiscretePath(basis, times, phi)
    path.checkDecay()
    action = problem.value(phi)
    penalty = value - action
    if not converged:
        logger.warning(f"action minimization stopped after {it} iterations with |g| = {gnorm:.3g}")
    return QuasiPotentialResult(action, path, converged, gnorm, it, penalty)


def compareVmuToV(endpoint, muLadder, nonlinearity, covariance, basis, T=12.0, M=400):
    """ Table of V̄_μ(u), computed with a free terminal velocity, against the heat quasi-potential V(u).

        Parameters
        ----------
        endpoint: ModeField or np.ndarray
        muLadder: list[float]
        nonlinearity: NonlinearityInterface
            gradient or non-gradient drift with Lipschitz constant below α₁.
        covariance: CovarianceSpec or np.ndarray
        basis: SpectralBasis
        T, M:
            grid of the minimizations.

        Returns
        -------
        list[dict]:
            rows (mu, vbar_mu, v, gap, relative gap, converged).
    """
    gamma = nonlinearity.lipschitz()
    alpha1 = basis.alphas[0]
    if not nonlinearity.isGradient and gamma > 0:
        threshold = (alpha1 - gamma) / gamma ** 2
        large = [mu for mu in muLadder if mu >= threshold]
        if large:
            logger.warning(f"masses {large} are not below (α₁ − γ₀)/γ₀² = {threshold:.4g}")
    reference = minimizeAction(endpoint, basis, nonlinearity, covariance, "heat", T=T, M=M)

    def cell(mu):
        result = minimizeAction(endpoint, basis, nonlinearity, covariance, "wave", mu=mu, T=T, M=M)
        gap = abs(result.value - reference.value)
        relative = gap / reference.value if reference.value > 0 else 0.0
        logger.info(f"quasipotential mu={mu}: vbar={result.value:.6g} v={reference.value:.6g} gap={gap:.3g}")
        return {"mu": float(mu), "vbar_mu": result.value, "v": reference.value, "gap": gap,
                "relative_gap": relative, "converged": result.converged and reference.converged}

    return PathPool("quasipotential").map(cell, muLadder)
