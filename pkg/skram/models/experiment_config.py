import json
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from skram.models.covariance_spec import CovarianceSpec
from skram.models.nonlinearity import NoiseCoefficient, makeNonlinearity
from skram.models.solver_config import SolverConfig
from skram.models.spectral_basis import ModeField, PhaseState, buildBasis
from skram.utils.hypotheses import HypothesisChecker
from skram.utils.run_report import ConfigurationError

experimentNames = ("sk-limit", "magnetic", "residual", "stationary", "quasipotential", "exit", "sin-variance")


class Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BasisBlock(Block):
    L: float = Field(np.pi, gt=0)
    N: int = Field(8, ge=1)
    vector_dim: Literal[1, 2] = 1


class CovarianceBlock(Block):
    kind: Literal["white", "power_law"] = "power_law"
    c: float = Field(1.0, gt=0)
    beta: float = Field(0.0, ge=0)
    d: int = Field(1, ge=1)


class NonlinearityBlock(Block):
    kind: Literal["none", "nemytskii", "klein_gordon", "gradient", "mode_lipschitz"] = "none"
    params: dict = Field(default_factory=dict)
    quadrature_points: Optional[int] = Field(None, ge=2)


class NoiseCoefficientBlock(Block):
    kind: Literal["bounded", "lipschitz"] = "bounded"
    g0: float = 1.0
    g1: float = 0.5


class SolverBlock(Block):
    mu: Optional[float] = Field(None, gt=0)
    eps: float = Field(0.0, ge=0)
    h: float = Field(0.01, gt=0)
    T: float = Field(1.0, ge=0)
    refine: int = Field(1, ge=1)
    record_every: int = Field(1, ge=1)
    u0: Optional[List[float]] = None
    v0: Optional[List[float]] = None
    multiplicative_g: Optional[NoiseCoefficientBlock] = None

    @model_validator(mode="after")
    def horizonCoversStep(self):
        if 0 < self.T < self.h * (1.0 - 1e-9):
            raise ValueError(f"T must be 0 or at least h, got T={self.T} and h={self.h}")
        return self


class SkLimitBlock(Block):
    mu_ladder: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.02, 0.004], min_length=1)
    n_paths: int = Field(64, ge=1)


class MagneticBlock(Block):
    mu_ladder: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.02], min_length=1)
    eps_ladder: List[float] = Field(default_factory=lambda: [0.5, 0.2, 0.0], min_length=1)
    n_paths: int = Field(64, ge=1)
    eps_limit: bool = True


class ResidualBlock(Block):
    mu_ladder: List[float] = Field(default_factory=lambda: [0.5, 0.1, 0.02], min_length=1)
    n_paths: int = Field(200, ge=1)
    test_mode: int = Field(1, ge=1)
    amplitude: float = 1.0


class StationaryBlock(Block):
    mu_a: float = Field(0.25, gt=0)
    mu_b: float = Field(1.0, gt=0)
    T: float = Field(2000.0, gt=0)
    n_paths: int = Field(32, ge=1)
    burn_in: float = Field(0.2, ge=0, lt=1)
    modes: int = Field(4, ge=1)
    record_every: int = Field(10, ge=1)
    mcmc_samples: int = Field(20000, ge=100)


class QuasipotentialBlock(Block):
    endpoint: List[float] = Field(min_length=1)
    mode: Literal["heat", "wave", "compare"] = "heat"
    mu: Optional[float] = Field(None, gt=0)
    mu_ladder: List[float] = Field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    endpoint_velocity: Optional[List[float]] = None
    T: float = Field(12.0, gt=0)
    M: int = Field(400, ge=8)
    growth: float = Field(20.0, ge=1)


class ExitBlock(Block):
    kind: Literal["wave", "heat"] = "heat"
    eps_ladder: List[float] = Field(default_factory=lambda: [0.25, 0.2, 0.15], min_length=1)
    radius: float = Field(1.0, gt=0)
    n_paths: int = Field(2000, ge=1)
    horizon: float = Field(1e4, gt=0)
    block_size: Optional[int] = Field(None, ge=1)
    partition: Literal["modes", "single"] = "modes"
    eta: float = Field(0.1, ge=0)
    boundary_minimum: bool = True
    grid_audit: bool = False


class SinVarianceBlock(Block):
    mu_ladder: List[float] = Field(default_factory=lambda: [0.1, 0.01, 0.001], min_length=1)
    t: float = Field(1.0, gt=0)
    n_paths: int = Field(100000, ge=2)
    cells: int = Field(64, ge=1)


blockOf = {
    "sk-limit": ("sk_limit", SkLimitBlock),
    "magnetic": ("magnetic", MagneticBlock),
    "residual": ("residual", ResidualBlock),
    "stationary": ("stationary", StationaryBlock),
    "quasipotential": ("quasipotential", QuasipotentialBlock),
    "exit": ("exit", ExitBlock),
    "sin-variance": ("sin_variance", SinVarianceBlock),
}


class ExperimentConfig(Block):
    """ Validated experiment configuration.

    Hypothesis flags of the covariance and the nonlinearity are checked against the chosen experiment
    during validation, so a run never starts under a failing precondition.
    """
    experiment: Literal["sk-limit", "magnetic", "residual", "stationary", "quasipotential", "exit", "sin-variance"]
    seed: int = Field(0, ge=0, lt=2 ** 64)
    basis: BasisBlock = Field(default_factory=BasisBlock)
    covariance: CovarianceBlock = Field(default_factory=CovarianceBlock)
    nonlinearity: NonlinearityBlock = Field(default_factory=NonlinearityBlock)
    solver: SolverBlock = Field(default_factory=SolverBlock)
    sk_limit: Optional[SkLimitBlock] = None
    magnetic: Optional[MagneticBlock] = None
    residual: Optional[ResidualBlock] = None
    stationary: Optional[StationaryBlock] = None
    quasipotential: Optional[QuasipotentialBlock] = None
    exit: Optional[ExitBlock] = None
    sin_variance: Optional[SinVarianceBlock] = None

    @model_validator(mode="after")
    def fillExperimentBlock(self):
        name, clz = blockOf[self.experiment]
        if getattr(self, name) is None:
            if clz is QuasipotentialBlock:
                raise ValueError("the quasipotential experiment needs a quasipotential block with an endpoint")
            setattr(self, name, clz())
        return self

    @model_validator(mode="after")
    def checkShapes(self):
        N = self.basis.N
        for label, values in (("solver.u0", self.solver.u0), ("solver.v0", self.solver.v0)):
            if values is not None and len(values) != N * self.basis.vector_dim:
                raise ValueError(f"{label} needs {N * self.basis.vector_dim} values, got {len(values)}")
        magnetic = self.experiment == "magnetic"
        if magnetic and self.basis.vector_dim != 2:
            raise ValueError("basis.vector_dim must be 2 for the magnetic experiment")
        if not magnetic and self.experiment != "sin-variance" and self.basis.vector_dim != 1:
            raise ValueError(f"basis.vector_dim must be 1 for the {self.experiment} experiment")
        if self.experiment == "quasipotential" and len(self.quasipotential.endpoint) != N:
            raise ValueError(f"quasipotential.endpoint needs {N} values, got {len(self.quasipotential.endpoint)}")
        if self.experiment == "quasipotential" and self.quasipotential.mode == "wave" and self.quasipotential.mu is None:
            raise ValueError("quasipotential.mu is required for the wave action")
        if self.experiment == "exit" and self.exit.kind == "wave" and self.solver.mu is None:
            raise ValueError("solver.mu is required for exits of the wave equation")
        for label in ("mu_ladder", "eps_ladder"):
            block = getattr(self, blockOf[self.experiment][0])
            ladder = getattr(block, label, None) or []
            if label == "mu_ladder" and any(not mu > 0 for mu in ladder):
                raise ValueError(f"{blockOf[self.experiment][0]}.mu_ladder must contain positive masses")
            if label == "eps_ladder" and any(eps < 0 for eps in ladder):
                raise ValueError(f"{blockOf[self.experiment][0]}.eps_ladder must be nonnegative")
        if self.experiment == "exit" and any(not eps > 0 for eps in self.exit.eps_ladder):
            raise ValueError("exit.eps_ladder must contain positive noise levels")
        return self

    @model_validator(mode="after")
    def checkHypotheses(self):
        HypothesisChecker(self.hypothesisFlags()).requireFor(self.hypothesisUsages(),
                                                             f"the {self.experiment} experiment")
        return self

    def hypothesisUsages(self):
        """Entries of the hypothesis table that constrain this configuration."""
        usages = [self.experiment]
        if self.experiment == "magnetic" and self.magnetic.eps_limit:
            usages.append("magnetic-eps-limit")
        if self.experiment in ("quasipotential", "exit") and not self.buildNonlinearity().isGradient:
            usages.append(f"{self.experiment}-non-gradient")
        if self.solver.multiplicative_g is not None and self.nonlinearity.kind == "klein_gordon":
            usages.append("klein-gordon-multiplicative")
        return usages

    def buildBasis(self):
        return buildBasis(self.basis.L, self.basis.N, self.basis.vector_dim)

    def buildCovariance(self):
        return CovarianceSpec(self.covariance.kind, self.covariance.c, self.covariance.beta, self.covariance.d)

    def buildNonlinearity(self, basis=None, covariance=None):
        basis = self.buildBasis() if basis is None else basis
        covariance = self.buildCovariance() if covariance is None else covariance
        try:
            return makeNonlinearity(self.nonlinearity.kind, basis, covariance, self.nonlinearity.quadrature_points,
                                    **self.nonlinearity.params)
        except TypeError as error:
            raise ConfigurationError(f"nonlinearity.params: {error}")

    def buildNoiseCoefficient(self, basis=None):
        """Multiplicative noise coefficient of the solver block, None for additive noise."""
        g = self.solver.multiplicative_g
        if g is None:
            return None
        basis = self.buildBasis() if basis is None else basis
        return NoiseCoefficient(basis, g.kind, g.g0, g.g1, self.nonlinearity.quadrature_points)

    def hypothesisFlags(self):
        flags = self.buildCovariance().flags()
        flags.update(self.buildNonlinearity().flags())
        coefficient = self.buildNoiseCoefficient()
        if coefficient is not None:
            flags.update(coefficient.flags())
        return flags

    def solverConfig(self):
        """SolverConfig of the solver block, shared by every cell of the experiment."""
        basis = self.buildBasis()
        covariance = self.buildCovariance()
        coefficient = self.buildNoiseCoefficient(basis)
        return SolverConfig(basis, covariance, self.buildNonlinearity(basis, covariance), mu=self.solver.mu,
                            eps=self.solver.eps, multiplicativeG=coefficient, h=self.solver.h, T=self.solver.T,
                            quadraturePoints=self.nonlinearity.quadrature_points,
                            recordEvery=self.solver.record_every, refine=self.solver.refine)

    def initialState(self, basis, phase=True):
        """Initial state of the solver block, zero when not given."""
        def field(values):
            if values is None:
                return ModeField.zeros(basis)
            values = np.asarray(values, dtype=float)
            if basis.vectorDim == 2:
                values = values[:basis.N] + 1j * values[basis.N:]
            return ModeField(basis, values)

        position = field(self.solver.u0)
        return PhaseState(position, field(self.solver.v0)) if phase else position

    def experimentBlock(self):
        return getattr(self, blockOf[self.experiment][0])


def formatValidationError(error):
    """One line per offending field, ``location: message``."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        lines.append(f"{location}: {item['msg']}")
    return "; ".join(lines)


def loadConfig(path, experiment=None, seed=None):
    """ Read and validate a JSON experiment configuration.

        Parameters
        ----------
        path: str
            configuration file.
        experiment: str
            experiment named on the command line; must agree with the file when the file names one.
        seed: int
            overrides the seed of the file.

        Returns
        -------
        ExperimentConfig
    """
    try:
        with open(path) as stream:
            data = json.load(stream)
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigurationError(f"cannot read configuration {path}: {error}")
    return parseConfig(data, experiment, seed)


def parseConfig(data, experiment=None, seed=None):
    """Validate a configuration dictionary, see ``loadConfig``."""
    data = dict(data)
    if experiment is not None:
        if experiment not in experimentNames:
            raise ConfigurationError(f"unknown experiment {experiment!r}, valid names are {list(experimentNames)}")
        if data.get("experiment", experiment) != experiment:
            raise ConfigurationError(f"configuration is for {data['experiment']!r}, not {experiment!r}")
        data["experiment"] = experiment
    if seed is not None:
        data["seed"] = int(seed)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as error:
        raise ConfigurationError(f"invalid configuration: {formatValidationError(error)}")
