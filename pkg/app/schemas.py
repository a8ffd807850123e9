# app/schemas.py

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

# --- Scenario config ---


class StrictModel(BaseModel):
    """Unknown keys and non-finite numbers are errors; loaded configs are immutable."""

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)


class DomainConfig(StrictModel):
    half_length: PositiveFloat  # a, the domain is (-a, a)
    interfaces: List[float] = []  # a_1 < ... < a_n, strictly inside the domain


class KernelPieceConfig(StrictModel):
    """One block formula for the patch pair (i, j): c, or c * exp(-b |x - y|)."""

    patches: Tuple[int, int]
    form: Literal["constant", "exponential"] = "constant"
    c: float = Field(ge=0)
    b: float = Field(0.0, ge=0)  # decay per unit length; exponential pieces only


class KernelConfig(StrictModel):
    delta: PositiveFloat  # strict lower bound on k
    lambda_bound: PositiveFloat  # upper bound on k
    pieces: List[KernelPieceConfig] = Field(min_length=1)


class GrowthConfig(StrictModel):
    variant: Literal["beverton_holt", "beverton_holt_influx"] = "beverton_holt"
    r0: PositiveFloat  # F'(0+)
    b: PositiveFloat = 1.0  # half-saturation density; M = c + r0 * b
    c: float = Field(0.0, ge=0)  # influx F(0), influx variant only


class DiscretizationConfig(StrictModel):
    panels_per_patch: int = Field(4, ge=1)
    gauss_order: int = Field(4, ge=1, le=16)


class TolerancesConfig(StrictModel):
    eigen_tol: PositiveFloat = 1e-12
    eigen_max_iter: PositiveInt = 100_000
    stationary_tol: PositiveFloat = 1e-10  # sup-norm step size
    extinction_threshold: PositiveFloat = 1e-12  # sup-norm
    max_generations: PositiveInt = 100_000


class OutputConfig(StrictModel):
    directory: str = "reports"
    formats: List[Literal["json", "csv"]] = ["json", "csv"]
    full_history: bool = False


class VerificationConfig(StrictModel):
    sample_count: int = Field(16, ge=2)  # per-axis validation lattice size
    uniqueness_seeds: int = Field(5, ge=2)
    uniqueness_tol: PositiveFloat = 1e-8  # pairwise sup-norm agreement of seed limits
    bracket_generations: PositiveInt = 25
    decay_threshold: PositiveFloat = 1e-8
    decay_max_generations: PositiveInt = 10_000


class SweepConfig(StrictModel):
    parameter: Literal["r0", "domain_half_length", "kernel_coefficient", "kernel_decay"]
    lo: float
    hi: float
    samples: int = Field(11, ge=2)
    pairs: List[Tuple[int, int]] = []  # patch pairs set to the swept value


class InitialProfileConfig(StrictModel):
    """Step profile: values[k] holds between breakpoints[k-1] and breakpoints[k]."""

    breakpoints: List[float] = []
    values: List[float] = Field(min_length=1)


def _increasing(points: List[float]) -> bool:
    return all(lo < hi for lo, hi in zip(points[:-1], points[1:]))


def _domain_problems(domain: DomainConfig) -> List[str]:
    a = domain.half_length
    problems = [f"domain.interfaces: interface {p} is outside (-{a}, {a})" for p in domain.interfaces if not -a < p < a]
    if not _increasing(domain.interfaces):
        problems.append(f"domain.interfaces: interfaces must be strictly increasing, got {domain.interfaces}")
    return problems


def _kernel_problems(kernel: KernelConfig, n: int) -> List[str]:
    problems = []
    if kernel.delta >= kernel.lambda_bound:
        problems.append(f"kernel: kernel.delta ({kernel.delta}) must be smaller than kernel.lambda_bound ({kernel.lambda_bound})")
    seen = set()
    for piece in kernel.pieces:
        i, j = piece.patches
        if not (0 <= i < n and 0 <= j < n):
            problems.append(f"kernel.pieces: patch pair ({i}, {j}) does not exist; patches are 0..{n - 1}")
        elif (i, j) in seen:
            problems.append(f"kernel.pieces: patch pair ({i}, {j}) is declared twice")
        if piece.form == "exponential" and piece.c <= 0:
            problems.append(f"kernel.pieces: exponential piece ({i}, {j}) needs c > 0")
        if piece.form == "constant" and piece.b != 0:
            problems.append(f"kernel.pieces: constant piece ({i}, {j}) takes no decay b")
        seen.add((i, j))
    missing = [(i, j) for i in range(n) for j in range(n) if (i, j) not in seen]
    if missing:
        problems.append(f"kernel.pieces: no formula for patch pairs {missing}")
    return problems


def _growth_problems(growth: GrowthConfig) -> List[str]:
    if growth.variant == "beverton_holt_influx" and growth.c <= 0:
        return ["growth: growth.c must be positive for the beverton_holt_influx variant"]
    if growth.variant == "beverton_holt" and growth.c != 0:
        return ["growth: growth.c is only allowed with the beverton_holt_influx variant"]
    return []


def _sweep_problems(sweep: SweepConfig, kernel: KernelConfig, n: int) -> List[str]:
    problems = []
    if not sweep.lo < sweep.hi:
        problems.append(f"threshold: threshold.lo ({sweep.lo}) must be below threshold.hi ({sweep.hi})")
    if sweep.parameter in ("kernel_coefficient", "kernel_decay") and not sweep.pairs:
        problems.append(f"threshold: threshold.pairs is required when sweeping {sweep.parameter}")
    if sweep.parameter in ("r0", "domain_half_length") and sweep.lo <= 0:
        problems.append(f"threshold: threshold.lo must be positive when sweeping {sweep.parameter}")
    forms = {tuple(p.patches): p.form for p in kernel.pieces}
    for i, j in sweep.pairs:
        if not (0 <= i < n and 0 <= j < n):
            problems.append(f"threshold.pairs: patch pair ({i}, {j}) does not exist")
        elif sweep.parameter == "kernel_decay" and forms.get((i, j), "exponential") != "exponential":
            problems.append(f"threshold.pairs: ({i}, {j}) is not an exponential piece")
    return problems


def _profile_problems(profile: InitialProfileConfig, a: float) -> List[str]:
    problems = []
    if len(profile.values) != len(profile.breakpoints) + 1:
        problems.append("initial_profile: initial_profile.values needs exactly one entry more than breakpoints")
    if any(v < 0 for v in profile.values):
        problems.append("initial_profile: initial_profile.values must be nonnegative")
    if not any(v > 0 for v in profile.values):
        problems.append("initial_profile: initial_profile must not be identically zero")
    for p in profile.breakpoints:
        if not -a < p < a:
            problems.append(f"initial_profile.breakpoints: {p} is outside (-{a}, {a})")
    if not _increasing(profile.breakpoints):
        problems.append("initial_profile.breakpoints must be strictly increasing")
    return problems


class ScenarioConfig(StrictModel):
    domain: DomainConfig
    kernel: KernelConfig
    growth: GrowthConfig
    discretization: DiscretizationConfig = Field(default_factory=DiscretizationConfig)
    tolerances: TolerancesConfig = Field(default_factory=TolerancesConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    verification: VerificationConfig = Field(default_factory=VerificationConfig)
    threshold: Optional[SweepConfig] = None
    initial_profile: Optional[InitialProfileConfig] = None
    seed: int = 20211014  # for uniqueness and decay probes
    workers: PositiveInt = 1

    @model_validator(mode="after")
    def _consistent(self):
        # checks that relate values across sections; all problems are reported together
        n = len(self.domain.interfaces) + 1
        problems = _domain_problems(self.domain)
        problems += _kernel_problems(self.kernel, n)
        problems += _growth_problems(self.growth)
        if self.threshold is not None:
            problems += _sweep_problems(self.threshold, self.kernel, n)
        if self.initial_profile is not None:
            problems += _profile_problems(self.initial_profile, self.domain.half_length)
        if problems:
            raise ValueError("\n".join(problems))
        return self
