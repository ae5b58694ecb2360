import numpy as np

from skram.helpers.propagator_helper import magneticEntries, waveEntries
from skram.interfaces.mode_system_interface import ModeSystemInterface
from skram.models.spectral_basis import ModeField, PhaseState
from skram.utils.run_report import ConfigurationError, InvalidParameterError


def _complexBlock(c):
    """Real 2×2 matrix of multiplication by the complex number c."""
    top = np.stack([c.real, -c.imag], axis=-1)
    bottom = np.stack([c.imag, c.real], axis=-1)
    return np.stack([top, bottom], axis=-2)


class WaveModeSystem(ModeSystemInterface):
    """Damped wave modes: u' = v, μv' = −αu − v, noise λ dβ/μ on the velocity."""
    stateDim = 2
    noiseDim = 1
    positionSlots = (0,)

    def __init__(self, alphas, mu):
        super().__init__(alphas)
        if not mu > 0:
            raise InvalidParameterError(f"mass must be positive, got mu={mu}")
        self.mu = float(mu)

    @staticmethod
    def getName():
        return "wave"

    def key(self):
        return ("wave", self.mu, tuple(self.alphas))

    def propagator(self, t):
        t = np.asarray(t, dtype=float)
        return waveEntries(self.mu, self.alphas, t[..., None]).matrix()

    def injection(self):
        inj = np.zeros((self.alphas.size, 2, 1))
        inj[:, 1, 0] = 1.0 / self.mu
        return inj

    def toArray(self, state):
        return np.stack([state.position.coeffs, state.velocity.coeffs], axis=-1).real

    def fromArray(self, basis, x):
        return PhaseState(ModeField(basis, x[:, 0]), ModeField(basis, x[:, 1]))


class HeatModeSystem(ModeSystemInterface):
    """Heat modes u' = −αu with noise λ dβ."""
    stateDim = 1
    noiseDim = 1
    positionSlots = (0,)

    @staticmethod
    def getName():
        return "heat"

    def key(self):
        return ("heat", tuple(self.alphas))

    def propagator(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.alphas * t[..., None])[..., None, None]

    def injection(self):
        return np.ones((self.alphas.size, 1, 1))

    def toArray(self, state):
        field = state.position if isinstance(state, PhaseState) else state
        return np.asarray(field.coeffs, dtype=float)[:, None]

    def fromArray(self, basis, x):
        return ModeField(basis, x[:, 0])


class MagneticModeSystem(ModeSystemInterface):
    """Two component wave modes μw'' = −αw − (ε − i)w' stored as (Re w, Im w, Re w', Im w')."""
    stateDim = 4
    noiseDim = 2
    positionSlots = (0, 1)

    def __init__(self, alphas, mu, eps):
        super().__init__(alphas)
        if not mu > 0:
            raise InvalidParameterError(f"mass must be positive, got mu={mu}")
        if eps < 0:
            raise InvalidParameterError(f"friction must be nonnegative, got eps={eps}")
        self.mu = float(mu)
        self.eps = float(eps)

    @staticmethod
    def getName():
        return "magnetic"

    def key(self):
        return ("magnetic", self.mu, self.eps, tuple(self.alphas))

    def propagator(self, t):
        t = np.asarray(t, dtype=float)
        return magneticEntries(self.mu, self.eps, self.alphas, t[..., None]).realMatrix()

    def injection(self):
        inj = np.zeros((self.alphas.size, 4, 2))
        inj[:, 2, 0] = 1.0 / self.mu
        inj[:, 3, 1] = 1.0 / self.mu
        return inj

    def toArray(self, state):
        u = np.asarray(state.position.coeffs, dtype=complex)
        v = np.asarray(state.velocity.coeffs, dtype=complex)
        return np.stack([u.real, u.imag, v.real, v.imag], axis=-1)

    def fromArray(self, basis, x):
        return PhaseState(ModeField(basis, x[:, 0] + 1j * x[:, 1]), ModeField(basis, x[:, 2] + 1j * x[:, 3]))


class RotatedHeatModeSystem(ModeSystemInterface):
    """First order limit of the magnetic modes: w' = (ε + i)(−αw + noise)/(1 + ε²)."""
    stateDim = 2
    noiseDim = 2
    positionSlots = (0, 1)

    def __init__(self, alphas, eps):
        super().__init__(alphas)
        if eps < 0:
            raise InvalidParameterError(f"friction must be nonnegative, got eps={eps}")
        self.eps = float(eps)

    @staticmethod
    def getName():
        return "rotated_heat"

    def key(self):
        return ("rotated_heat", self.eps, tuple(self.alphas))

    def propagator(self, t):
        t = np.asarray(t, dtype=float)
        factor = np.exp(-self.alphas * (self.eps + 1j) * t[..., None] / (1.0 + self.eps ** 2))
        return _complexBlock(factor)

    def injection(self):
        scale = 1.0 + self.eps ** 2
        block = _complexBlock(np.array((self.eps + 1j) / scale))
        return np.broadcast_to(block, (self.alphas.size, 2, 2)).copy()

    def toArray(self, state):
        field = state.position if isinstance(state, PhaseState) else state
        u = np.asarray(field.coeffs, dtype=complex)
        return np.stack([u.real, u.imag], axis=-1)

    def fromArray(self, basis, x):
        return ModeField(basis, x[:, 0] + 1j * x[:, 1])


def installSystems():
    """Create a dictionary of the implemented mode systems"""
    return {sub_clz.getName(): sub_clz for sub_clz in ModeSystemInterface.__subclasses__()}


def makeSystem(kind, basis, mu=None, eps=0.0):
    """ Build a mode system by name.

        Parameters
        ----------
        kind: str
            ``wave``, ``heat``, ``magnetic`` or ``rotated_heat``.
        basis: SpectralBasis
        mu: float
            mass, required by ``wave`` and ``magnetic``.
        eps: float
            friction of the two component systems.

        Returns
        -------
        ModeSystemInterface
    """
    systems = installSystems()
    if kind not in systems:
        raise ConfigurationError(f"unknown mode system {kind!r}, valid names are {sorted(systems)}")
    if kind == "wave":
        return WaveModeSystem(basis.alphas, mu)
    if kind == "heat":
        return HeatModeSystem(basis.alphas)
    if kind == "magnetic":
        return MagneticModeSystem(basis.alphas, mu, eps)
    return RotatedHeatModeSystem(basis.alphas, eps)
