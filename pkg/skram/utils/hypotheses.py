from skram.utils.run_report import HypothesisError

hypothesisTable = [

    {
        "flag": "holder_regularity",
        "condition": "Σ λ_k²/α_k^{1−θ} < ∞ for some θ ∈ (0,1), i.e. β > (d−2)/4",
        "source": "covariance",
        "usedBy": ["sk-limit", "residual"],
    },
    {
        "flag": "finite_energy",
        "condition": "Σ λ_k²/α_k < ∞, i.e. β > (d−2)/4",
        "source": "covariance",
        "usedBy": ["magnetic", "stationary"],
    },
    {
        "flag": "power_law_bounds",
        "condition": "(1/c)α_k^{−β} ≤ λ_k ≤ c·α_k^{−β} with β > (d−2)/4",
        "source": "covariance",
        "usedBy": ["quasipotential", "exit"],
    },
    {
        "flag": "trace_class",
        "condition": "Σ λ_k² < +∞, i.e. β > d/4",
        "source": "covariance",
        "usedBy": ["magnetic-eps-limit"],
    },
    {
        "flag": "gradient_drift",
        "condition": "B(h) = −Q²DF(h) with F ≥ 0, F(0) = 0 and DF Lipschitz",
        "source": "nonlinearity",
        "usedBy": ["stationary-boltzmann"],
    },
    {
        "flag": "lipschitz_below_gap",
        "condition": "B Lipschitz with constant γ₀ < α₁ and B(0) = 0",
        "source": "nonlinearity",
        "usedBy": ["quasipotential-non-gradient", "exit-non-gradient"],
    },
    {
        "flag": "bounded_noise_coefficient",
        "condition": "g bounded, needed by multiplicative noise with a Klein-Gordon drift",
        "source": "noise coefficient",
        "usedBy": ["klein-gordon-multiplicative"],
    }

]


class HypothesisChecker:
    """Look up hypothesis conditions and enforce them against computed flags."""

    def __init__(self, flags):
        """Initialize function.

            Parameters
            ----------
            flags: dict
                flag name to bool, as returned by ``CovarianceSpec.flags`` and ``NonlinearityInterface.flags``.
        """
        self.flags = dict(flags)

    @staticmethod
    def condition(flag):
        """ Text of the condition behind a flag.

            Parameters
            ----------
            flag: str

            Returns
            -------
            str:
                the condition, or the flag itself when unknown.
        """
        for entry in hypothesisTable:
            if entry["flag"] == flag:
                return entry["condition"]
        return flag

    def require(self, flag, context):
        """ Raise if a flag does not hold.

            Parameters
            ----------
            flag: str
                name of the flag.
            context: str
                what needs the flag, used in the message.
        """
        if not self.flags.get(flag, False):
            raise HypothesisError(f"{context} requires {flag}: {HypothesisChecker.condition(flag)}")

    @staticmethod
    def requiredBy(usage):
        """Flags whose ``usedBy`` list names the given usage."""
        return [entry["flag"] for entry in hypothesisTable if usage in entry["usedBy"]]

    def requireFor(self, usages, context):
        """ Enforce every flag needed by the given usages.

            Parameters
            ----------
            usages: list[str]
                experiment names and qualified usages such as ``exit-non-gradient``.
            context: str
                what needs the flags, used in the message.
        """
        for usage in usages:
            for flag in HypothesisChecker.requiredBy(usage):
                self.require(flag, context)

    def summary(self, usages):
        """ Checked flags with their conditions, for manifests.

            Returns
            -------
            dict:
                flag name to ``{"holds", "condition", "usedBy"}`` for every flag needed by the usages.
        """
        result = {}
        for usage in usages:
            for flag in HypothesisChecker.requiredBy(usage):
                entry = result.setdefault(flag, {"holds": bool(self.flags.get(flag, False)),
                                                 "condition": HypothesisChecker.condition(flag), "usedBy": []})
                entry["usedBy"].append(usage)
        return result
