# app/core/threshold.py

"""
Critical parameter values where lambda0 crosses 1, and one-parameter phase tables.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import pandas as pd
from loguru import logger
from scipy.optimize import brentq

from app.core.discretize import DiscreteOperator, Resolution, assemble_operator, build_grid
from app.core.dynamics import Regime, classify_regime
from app.core.errors import InvariantViolation, NonMonotoneCrossing
from app.core.landscape import Scenario, validate_assumptions
from app.core.spectral import DEFAULT_MAX_ITER, DEFAULT_TOL, principal_eigen

SweepParameter = Literal["r0", "domain_half_length", "kernel_coefficient", "kernel_decay"]
MONOTONE_SLACK = 1e-10
CROSSING_RESOLUTION = 1e-6


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    lo: float
    hi: float
    samples: int
    pairs: tuple[tuple[int, int], ...] = ()
    resolution: Resolution = field(default_factory=Resolution)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"sweep range needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.samples < 2:
            raise ValueError(f"sweep needs at least 2 samples, got {self.samples}")
        if self.parameter in ("kernel_coefficient", "kernel_decay") and not self.pairs:
            raise ValueError(f"sweeping {self.parameter} needs the patch pairs it applies to")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.samples)


@dataclass(frozen=True)
class PhaseRow:
    value: float
    lambda0: float
    regime: Regime


@dataclass(frozen=True)
class Crossing:
    lo: float
    hi: float
    value: float
    lambda0: float


@dataclass(frozen=True)
class PhaseTable:
    parameter: str
    rows: tuple[PhaseRow, ...]
    crossings: tuple[Crossing, ...]
    endpoint_warnings: tuple[str, ...] = ()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "parameter": [r.value for r in self.rows],
                "lambda0": [r.lambda0 for r in self.rows],
                "regime": [r.regime.value for r in self.rows],
            }
        )

    def crossings_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "parameter": [self.parameter] * len(self.crossings),
                "critical_value": [c.value for c in self.crossings],
                "bracket_lo": [c.lo for c in self.crossings],
                "bracket_hi": [c.hi for c in self.crossings],
                "lambda0": [c.lambda0 for c in self.crossings],
            }
        )


def critical_r0(op: DiscreteOperator, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> float:
    """r0* = 1 / rho(K), using lambda0(r0) = r0 * lambda0(1)."""
    rho = principal_eigen(op, 1.0, tol, max_iter).lambda0
    r_star = 1.0 / rho
    check = principal_eigen(op, r_star, tol, max_iter).lambda0
    # each run stops on its own residual test
    if abs(check - 1.0) > max(100 * tol, 1e-10):
        raise InvariantViolation(f"lambda0 at r0*={r_star!r} is {check!r}, not 1")
    logger.info(f"Critical growth rate r0* = {r_star:.12g} (rho(K) = {rho:.12g})")
    return r_star


class _Evaluator:
    """lambda0 as a function of the swept parameter; grids are reused while the partition is fixed."""

    def __init__(self, base: Scenario, sweep: SweepSpec, tol: float, max_iter: int):
        self.base = base
        self.sweep = sweep
        self.tol = tol
        self.max_iter = max_iter
        res = sweep.resolution
        self._grid = build_grid(base.partition, res.panels_per_patch, res.gauss_order)
        self._op = assemble_operator(base.kernel, self._grid) if sweep.parameter == "r0" else None

    def scenario(self, value: float) -> Scenario:
        return self.base.with_parameter(self.sweep.parameter, float(value), self.sweep.pairs)

    def operator(self, scenario: Scenario) -> DiscreteOperator:
        if self._op is not None:
            return self._op
        if scenario.partition == self._grid.partition:
            grid = self._grid
        else:
            res = self.sweep.resolution
            grid = build_grid(scenario.partition, res.panels_per_patch, res.gauss_order)
        return assemble_operator(scenario.kernel, grid)

    def __call__(self, value: float) -> PhaseRow:
        scenario = self.scenario(value)
        lam = principal_eigen(self.operator(scenario), scenario.growth.r0, self.tol, self.max_iter).lambda0
        return PhaseRow(float(value), lam, classify_regime(lam, scenario.growth))


def _monotone_expected(base: Scenario, parameter: str) -> bool:
    if parameter in ("r0", "kernel_coefficient"):
        return True
    return parameter == "domain_half_length" and base.kernel.is_block_constant


def sweep(
    spec_base: Scenario,
    sweep: SweepSpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> PhaseTable:
    """Tabulates lambda0 and the regime over the range and pins down every regime change."""
    evaluate = _Evaluator(spec_base, sweep, tol, max_iter)

    warnings = []
    for end in (sweep.lo, sweep.hi):
        scenario = evaluate.scenario(end)
        report = validate_assumptions(scenario.kernel, scenario.growth, sample_count=8)
        for check in report.failures():
            if not check.advisory:
                warnings.append(f"{sweep.parameter}={end:g}: {check.name} failed ({check.detail})")
    for w in warnings:
        logger.warning(f"Sweep endpoint hypothesis failure: {w}")

    values = sweep.values
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, values))
    else:
        rows = [evaluate(v) for v in values]

    lams = np.array([r.lambda0 for r in rows])
    if _monotone_expected(spec_base, sweep.parameter):
        drop = float(np.max(lams[:-1] - lams[1:]))
        if drop > MONOTONE_SLACK * max(1.0, float(lams.max())):
            raise InvariantViolation(f"lambda0 decreased by {drop:.3e} along the {sweep.parameter} sweep")

    brackets = [
        (rows[k].value, rows[k + 1].value)
        for k in range(len(rows) - 1)
        if rows[k].regime is not rows[k + 1].regime
    ]
    if len(brackets) > 1:
        raise NonMonotoneCrossing(
            f"lambda0 - 1 changes sign {len(brackets)} times along the {sweep.parameter} sweep", brackets
        )

    crossings = []
    for lo, hi in brackets:
        crossings.append(_locate(evaluate, spec_base, sweep, lo, hi, tol, max_iter))
        logger.info(f"Regime change for {sweep.parameter} at {crossings[-1].value:.12g} (bracket [{lo:g}, {hi:g}])")
    return PhaseTable(sweep.parameter, tuple(rows), tuple(crossings), tuple(warnings))


def _locate(evaluate: _Evaluator, base: Scenario, sweep: SweepSpec, lo: float, hi: float, tol: float, max_iter: int) -> Crossing:
    if sweep.parameter == "r0":
        value = critical_r0(evaluate.operator(base), tol, max_iter)
        if lo <= value <= hi:
            return Crossing(lo, hi, value, evaluate(value).lambda0)
        logger.warning(f"closed-form r0*={value:.12g} fell outside [{lo:g}, {hi:g}]; bisecting instead")

    def excess(p: float) -> float:
        return evaluate(p).lambda0 - 1.0

    f_lo = excess(lo)
    if f_lo == 0.0:
        return Crossing(lo, hi, lo, 1.0)
    value = brentq(excess, lo, hi, xtol=(sweep.hi - sweep.lo) * CROSSING_RESOLUTION, rtol=4 * np.finfo(float).eps)
    return Crossing(lo, hi, float(value), evaluate(value).lambda0)
