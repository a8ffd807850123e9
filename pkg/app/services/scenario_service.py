# app/services/scenario_service.py

import hashlib
import json
from functools import cached_property
from pathlib import Path

import pydantic
from loguru import logger

from app.core.discretize import DiscreteOperator, Grid, Resolution, assemble_operator, build_grid
from app.core.errors import ConfigParseError, ConfigValidationError
from app.core.landscape import (
    GrowthFunction,
    KernelPiece,
    KernelSpec,
    PatchPartition,
    PiecewiseProfile,
    Scenario,
)
from app.core.spectral import EigenPair, principal_eigen
from app.core.threshold import SweepSpec
from app.schemas import ScenarioConfig


def load_config(path: str | Path) -> ScenarioConfig:
    """
    Reads a JSON scenario file and returns the fully defaulted config.
    Every validation problem is reported in a single ConfigValidationError.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigParseError(f"cannot read config {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise ConfigParseError(f"config {path} is not UTF-8 text: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"config {path} is not valid JSON: {e}") from e

    try:
        config = ScenarioConfig.model_validate(raw)
    except pydantic.ValidationError as e:
        problems = []
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"])
            msg = err["msg"].removeprefix("Value error, ")
            problems.extend(f"{loc}: {line}" if loc else line for line in msg.splitlines())
        raise ConfigValidationError(problems) from e

    logger.info(f"Loaded scenario config from {path}")
    return config


def config_echo(config: ScenarioConfig) -> dict:
    return config.model_dump(mode="json")


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config_echo(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def scenario_from_config(config: ScenarioConfig) -> Scenario:
    partition = PatchPartition(config.domain.half_length, tuple(config.domain.interfaces))
    pieces = {tuple(p.patches): KernelPiece(p.form, p.c, p.b) for p in config.kernel.pieces}
    kernel = KernelSpec.from_pairs(partition, pieces, config.kernel.delta, config.kernel.lambda_bound)
    g = config.growth
    growth = GrowthFunction(g.variant, g.r0, g.b, g.c)
    return Scenario(partition, kernel, growth)


def resolution_from_config(config: ScenarioConfig) -> Resolution:
    return Resolution(config.discretization.panels_per_patch, config.discretization.gauss_order)


def sweep_from_config(config: ScenarioConfig) -> SweepSpec | None:
    t = config.threshold
    if t is None:
        return None
    pairs = tuple(tuple(p) for p in t.pairs)
    return SweepSpec(t.parameter, t.lo, t.hi, t.samples, pairs, resolution_from_config(config))


def profile_from_config(config: ScenarioConfig) -> PiecewiseProfile | None:
    p = config.initial_profile
    if p is None:
        return None
    return PiecewiseProfile(tuple(p.breakpoints), tuple(p.values))


class PreparedScenario:
    """Lazily builds the grid, operator and eigenpair a command needs, once each."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.scenario = scenario_from_config(config)
        self.resolution = resolution_from_config(config)

    @cached_property
    def grid(self) -> Grid:
        res = self.resolution
        grid = build_grid(self.scenario.partition, res.panels_per_patch, res.gauss_order)
        logger.info(f"Grid: {grid.size} nodes ({res.panels_per_patch} panels/patch, {grid.rule})")
        return grid

    @cached_property
    def operator(self) -> DiscreteOperator:
        return assemble_operator(self.scenario.kernel, self.grid)

    @cached_property
    def eigenpair(self) -> EigenPair:
        tol = self.config.tolerances
        pair = principal_eigen(self.operator, self.scenario.growth.r0, tol.eigen_tol, tol.eigen_max_iter)
        logger.info(f"Principal eigenvalue lambda0 = {pair.lambda0:.12g} after {pair.iterations} iterations")
        return pair
