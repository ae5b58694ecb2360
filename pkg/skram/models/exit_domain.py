import numpy as np

from skram.utils.run_report import ConfigurationError, DomainError


class ExitDomain():
    """Open H-ball of radius r centered at 0."""

    def __init__(self, radius=1.0):
        if not radius > 0:
            raise ConfigurationError(f"domain radius must be positive, got r={radius}")
        self.radius = float(radius)

    def __repr__(self):
        return f"ExitDomain(radius={self.radius})"

    def contains(self, u):
        """True for coefficient vectors of shape (..., N) strictly inside the ball."""
        return np.sqrt(np.sum(np.abs(np.asarray(u)) ** 2, axis=-1)) < self.radius


class ExitRecord():
    """First exit of one path.

    ``exitField`` is None for censored paths, whose ``tau`` is the horizon, and for failed paths, whose
    state blew up at ``tau`` before leaving the domain.
    """

    def __init__(self, eps, pathId, tau, exitField, censored, overshoot=0.0, failed=False):
        self.eps = float(eps)
        self.pathId = int(pathId)
        self.tau = float(tau)
        self.exitField = None if exitField is None else np.asarray(exitField, dtype=float)
        self.censored = bool(censored)
        self.overshoot = float(overshoot)
        self.failed = bool(failed)

    def __repr__(self):
        return (f"ExitRecord(eps={self.eps}, path={self.pathId}, tau={self.tau}, censored={self.censored}, "
                f"failed={self.failed})")

    @property
    def exited(self):
        """True for a genuine exit through the boundary."""
        return not (self.censored or self.failed)


class BoundaryPartition():
    """ Partition of the sphere into named cells.

    ``modes`` assigns a point to the cell ±e_k of its dominant coefficient, ``single`` puts everything in one
    cell and ``halfspaces`` uses the first named half-space {⟨u, n⟩ > 0} containing the point, with the
    remaining points in ``rest``.
    """
    kinds = ("modes", "single", "halfspaces")

    def __init__(self, kind="modes", halfspaces=None):
        if kind not in BoundaryPartition.kinds:
            raise ConfigurationError(f"partition kind must be one of {BoundaryPartition.kinds}, got {kind!r}")
        if kind == "halfspaces" and not halfspaces:
            raise ConfigurationError("a half-space partition needs at least one (name, normal) pair")
        self.kind = kind
        self.halfspaces = [(name, np.asarray(normal, dtype=float)) for name, normal in (halfspaces or [])]

    def cells(self, N):
        if self.kind == "single":
            return ["boundary"]
        if self.kind == "modes":
            return [f"{sign}e_{k}" for k in range(1, N + 1) for sign in ("+", "-")]
        return [name for name, _ in self.halfspaces] + ["rest"]

    def cellOf(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise DomainError("exit places must be finite")
        if self.kind == "single":
            return "boundary"
        if self.kind == "modes":
            k = int(np.argmax(np.abs(u)))
            return f"{'+' if u[k] >= 0 else '-'}e_{k + 1}"
        for name, normal in self.halfspaces:
            if float(u @ normal) > 0:
                return name
        return "rest"
