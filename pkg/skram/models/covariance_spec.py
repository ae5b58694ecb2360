import numpy as np

from skram.utils.run_report import ConfigurationError


class CovarianceSpec():
    """Diagonal covariance Q of the noise, λ_k = c·α_k^{−β}.

    Hypothesis flags are decided analytically from (kind, β, d) with the Weyl asymptotics α_k ~ k^{2/d}.
    """
    kinds = ("white", "power_law")

    def __init__(self, kind="power_law", c=1.0, beta=0.0, d=1):
        """Initialize function.

            Parameters
            ----------
            kind: str
                ``white`` (λ_k = c) or ``power_law``.
            c: float
                positive scale.
            beta: float
                decay exponent, nonnegative; ignored for white noise.
            d: int
                nominal spatial dimension used by the hypothesis flags only.
        """
        if kind not in CovarianceSpec.kinds:
            raise ConfigurationError(f"covariance kind must be one of {CovarianceSpec.kinds}, got {kind!r}")
        if not c > 0:
            raise ConfigurationError(f"covariance scale must be positive, got c={c}")
        if beta < 0:
            raise ConfigurationError(f"decay exponent must be nonnegative, got beta={beta}")
        if int(d) != d or d < 1:
            raise ConfigurationError(f"dimension must be a positive integer, got d={d}")
        self.kind = kind
        self.c = float(c)
        self.beta = 0.0 if kind == "white" else float(beta)
        self.d = int(d)

    def __repr__(self):
        return f"CovarianceSpec(kind={self.kind!r}, c={self.c}, beta={self.beta}, d={self.d})"

    def __eq__(self, other):
        return isinstance(other, CovarianceSpec) and self.toDict() == other.toDict()

    def __hash__(self):
        return hash((self.kind, self.c, self.beta, self.d))

    def lambdas(self, basis):
        """Eigenvalues λ_1..λ_N of Q on the given basis."""
        return self.c * basis.alphas ** (-self.beta)

    def supremalTheta(self):
        """Supremum of the admissible θ ∈ (0, 1) with Σ λ_k²/α_k^{1−θ} < ∞; 0 when none exists."""
        return float(min(1.0, max(0.0, 2.0 * self.beta + 1.0 - self.d / 2.0)))

    def flags(self):
        """ Hypothesis flags of the covariance.

            Returns
            -------
            dict:
                ``holder_regularity``, ``finite_energy``, ``power_law_bounds`` and ``trace_class``.
        """
        energy = self.beta > (self.d - 2) / 4.0
        return {
            "holder_regularity": bool(energy),
            "finite_energy": bool(energy),
            "power_law_bounds": bool(energy),
            "trace_class": bool(self.beta > self.d / 4.0),
        }

    def toDict(self):
        return {"kind": self.kind, "c": self.c, "beta": self.beta, "d": self.d}

    @staticmethod
    def fromDict(dic):
        return CovarianceSpec(dic.get("kind", "power_law"), dic.get("c", 1.0), dic.get("beta", 0.0), dic.get("d", 1))


def lambdasOf(covariance, basis):
    """Noise eigenvalues from a ``CovarianceSpec`` or from an explicit array of N values."""
    if isinstance(covariance, CovarianceSpec):
        return covariance.lambdas(basis)
    lambdas = np.asarray(covariance, dtype=float).reshape(-1)
    if lambdas.size != basis.N:
        raise ConfigurationError(f"expected {basis.N} noise eigenvalues, got {lambdas.size}")
    return lambdas
