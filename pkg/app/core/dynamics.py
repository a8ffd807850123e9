# app/core/dynamics.py

"""
Generation map, sub/super-solution brackets and the stationary state.

T is monotone (F increasing, K >= 0), so iterating from a super-solution
gives a nonincreasing sequence and from a sub-solution a nondecreasing one.
Running both in lock-step squeezes the stationary state between them.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from loguru import logger

from app.core.discretize import DiscreteOperator, apply_T, integrate, weighted_l2
from app.core.errors import (
    BracketMismatch,
    Disagreement,
    EpsilonSearchFailed,
    InvariantViolation,
    NoConvergence,
    PreconditionUnmet,
)
from app.core.landscape import GrowthFunction, random_profile
from app.core.spectral import EigenPair

DEFAULT_STATIONARY_TOL = 1e-10
DEFAULT_EXTINCTION_THRESHOLD = 1e-12
DEFAULT_MAX_GENERATIONS = 100_000
DEFAULT_SEED = 20211014
ORDER_SLACK = 1e-13
MAX_HALVINGS = 60
CRITICAL_BAND = 1e-3
STALL_FRACTION = 1e-3


class Regime(str, Enum):
    EXTINCTION = "Extinction"
    PERSISTENCE = "Persistence"
    PERSISTENCE_WITH_INFLUX = "PersistenceWithInflux"


class Termination(str, Enum):
    TOLERANCE_MET = "ToleranceMet"
    MAX_GENERATIONS = "MaxGenerations"
    BELOW_THRESHOLD = "BelowThreshold"


@dataclass(eq=False)
class Trajectory:
    iterates: list[np.ndarray]
    sup_diffs: list[float] = field(default_factory=list)
    l2_diffs: list[float] = field(default_factory=list)
    terminated_by: Termination | None = None
    # Largest step against the direction fixed by the first step.
    monotone_violation: float = 0.0
    direction: str = "flat"
    norm_consistent: bool = True

    @property
    def generations(self) -> int:
        return len(self.sup_diffs)

    @property
    def last(self) -> np.ndarray:
        return self.iterates[-1]


class _Recorder:
    """Keeps norm histories and the last iterates of one run."""

    def __init__(self, op: DiscreteOperator, u0: np.ndarray, full_history: bool, expect: str | None = None):
        self.op = op
        self.expect = expect
        self.sqrt_length = math.sqrt(op.grid.partition.length)
        store = [] if full_history else deque(maxlen=2)
        store.append(np.array(u0, dtype=float))
        self.trajectory = Trajectory(iterates=store, direction=expect or "flat")

    def push(self, nxt: np.ndarray) -> float:
        t = self.trajectory
        diff = nxt - t.iterates[-1]
        sup = float(np.abs(diff).max())
        l2 = weighted_l2(self.op.grid, diff)
        if t.generations == 0 and self.expect is None and sup > 0:
            t.direction = "up" if np.all(diff >= 0) else "down" if np.all(diff <= 0) else "none"
        if t.direction == "up":
            t.monotone_violation = max(t.monotone_violation, float(-diff.min()))
        elif t.direction == "down":
            t.monotone_violation = max(t.monotone_violation, float(diff.max()))
        if l2 > self.sqrt_length * sup * (1 + 1e-12) + 1e-300:
            t.norm_consistent = False
        t.sup_diffs.append(sup)
        t.l2_diffs.append(l2)
        t.iterates.append(nxt)
        return sup

    def finish(self, how: Termination) -> Trajectory:
        self.trajectory.iterates = list(self.trajectory.iterates)
        self.trajectory.terminated_by = how
        return self.trajectory


def iterate(
    op: DiscreteOperator,
    g: GrowthFunction,
    u0: np.ndarray,
    tol: float,
    max_gen: int,
    full_history: bool = False,
    stop_below: float | None = None,
    expect: str | None = None,
) -> Trajectory:
    """
    Applies T until successive iterates differ by less than tol in sup-norm,
    or (with stop_below) until the iterate itself drops under stop_below.
    expect ("up" or "down") fixes the direction monotone_violation is measured
    against; otherwise the first step decides it.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    u = np.asarray(u0, dtype=float)
    if np.any(u < 0):
        raise PreconditionUnmet("initial profile must be nonnegative")

    rec = _Recorder(op, u, full_history, expect)
    for _ in range(max_gen):
        nxt = apply_T(op, g, u)
        sup = rec.push(nxt)
        u = nxt
        if stop_below is not None and u.max() < stop_below:
            return rec.finish(Termination.BELOW_THRESHOLD)
        if stop_below is None and sup < tol:
            return rec.finish(Termination.TOLERANCE_MET)
    return rec.finish(Termination.MAX_GENERATIONS)


@dataclass(eq=False)
class Bracket:
    lower_start: np.ndarray
    upper_start: np.ndarray
    epsilon: float
    h: float
    N_value: float
    lower_gap: float | None = None  # min(T(lower) - lower) when epsilon > 0


@dataclass(frozen=True)
class BracketDiagnostics:
    generations: int
    ordering_violation: float  # max(upward - downward) over all generations
    upward_monotone_violation: float
    downward_monotone_violation: float
    gap: float  # final sup |downward - upward|

    @property
    def passed(self) -> bool:
        return max(self.ordering_violation, self.upward_monotone_violation, self.downward_monotone_violation) <= ORDER_SLACK


@dataclass(eq=False)
class RegimeReport:
    regime: Regime
    lambda0: float
    stationary: np.ndarray
    generations_used: int
    bracket: Bracket
    norms: dict
    downward: Trajectory
    upward: Trajectory | None = None
    diagnostics: BracketDiagnostics | None = None
    positivity_bound: float = 0.0
    critical_slowdown: bool = False


def super_solution_start(op: DiscreteOperator, g: GrowthFunction) -> np.ndarray:
    """Constant N = 2 * (2a * Lambda * M); T(N) <= 2a * Lambda * M < N."""
    spec = op.kernel
    n_value = 2.0 * (spec.partition.length * spec.lambda_bound * g.bound)
    upper = np.full(op.size, n_value)
    if np.any(apply_T(op, g, upper) > upper):
        raise PreconditionUnmet("constant N is not a super-solution; the declared Lambda is too small")
    return upper


def sub_solution_start(pair: EigenPair, op: DiscreteOperator, g: GrowthFunction) -> tuple[float, np.ndarray]:
    """
    Finds eps with T(eps * phi0) >= lambda0 / (1 + h) * eps * phi0 by halving from 1,
    where h = sqrt(min(r0, lambda0)) - 1 keeps lambda0 / (1 + h) > 1.
    """
    if not (pair.lambda0 > 1 and g.r0 > 1 and g.f0 == 0):
        raise PreconditionUnmet(
            f"a small multiple of phi0 is a sub-solution only when lambda0 > 1, r0 > 1 and F(0) = 0 "
            f"(lambda0={pair.lambda0:.6g}, r0={g.r0:.6g}, F(0)={g.f0:.6g})"
        )
    h = math.sqrt(min(g.r0, pair.lambda0)) - 1.0
    factor = pair.lambda0 / (1.0 + h)
    eps = 1.0
    for _ in range(MAX_HALVINGS + 1):
        lower = eps * pair.phi0
        if np.all(apply_T(op, g, lower) >= factor * lower):
            logger.debug(f"Sub-solution accepted at eps={eps!r} (h={h:.6g})")
            return eps, lower
        eps /= 2.0
    raise EpsilonSearchFailed(f"no admissible eps after {MAX_HALVINGS} halvings; lambda0 is effectively <= 1")


def classify_regime(lambda0: float, g: GrowthFunction) -> Regime:
    if g.f0 > 0:
        return Regime.PERSISTENCE_WITH_INFLUX
    if lambda0 <= 1:
        return Regime.EXTINCTION
    return Regime.PERSISTENCE


def _squeeze(
    op: DiscreteOperator,
    g: GrowthFunction,
    lower: np.ndarray,
    upper: np.ndarray,
    tol: float | None,
    max_gen: int,
    full_history: bool = False,
) -> tuple[Trajectory, Trajectory, BracketDiagnostics]:
    """Iterates both ends of a bracket in lock-step, checking order every generation.

    With tol=None it runs exactly max_gen generations.
    """
    up_rec = _Recorder(op, lower, full_history, expect="up")
    down_rec = _Recorder(op, upper, full_history, expect="down")
    up, down = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    ordering = float((up - down).max())
    converged = stalled = False
    for _ in range(max_gen):
        up, down = apply_T(op, g, up), apply_T(op, g, down)
        up_sup, down_sup = up_rec.push(up), down_rec.push(down)
        ordering = max(ordering, float((up - down).max()))
        if tol is not None and up_sup < tol and down_sup < tol:
            # keep going while the gap still closes; both ends frozen apart is a mismatch
            if float(np.abs(down - up).max()) <= 10 * tol:
                converged = True
                break
            if max(up_sup, down_sup) < STALL_FRACTION * tol:
                stalled = True
                break

    how = Termination.TOLERANCE_MET if converged else Termination.MAX_GENERATIONS
    upward, downward = up_rec.finish(how), down_rec.finish(how)
    diagnostics = BracketDiagnostics(
        generations=downward.generations,
        ordering_violation=max(ordering, 0.0),
        upward_monotone_violation=upward.monotone_violation,
        downward_monotone_violation=downward.monotone_violation,
        gap=float(np.abs(down - up).max()),
    )
    if not diagnostics.passed:
        if tol is not None:
            raise InvariantViolation(f"bracket monotonicity/ordering violated beyond {ORDER_SLACK:g}: {diagnostics}")
        logger.warning(f"Bracket monotonicity/ordering violated: {diagnostics}")
    if tol is not None and not (converged or stalled):
        raise NoConvergence(
            f"bracket did not converge in {max_gen} generations (gap {diagnostics.gap:.3e})",
            estimate=down,
            residual=max(upward.sup_diffs[-1], downward.sup_diffs[-1]) if upward.sup_diffs else None,
        )
    return upward, downward, diagnostics


def monotone_bracket_check(
    op: DiscreteOperator, g: GrowthFunction, lower: np.ndarray, upper: np.ndarray, generations: int
) -> BracketDiagnostics:
    """A short lock-step run from a sub- and a super-solution."""
    return _squeeze(op, g, lower, upper, None, generations)[2]


def _residual_norms(op: DiscreteOperator, g: GrowthFunction, w: np.ndarray) -> dict:
    r = apply_T(op, g, w) - w
    return {"sup": float(np.abs(r).max()), "l2": weighted_l2(op.grid, r)}


def solve_stationary(
    op: DiscreteOperator,
    g: GrowthFunction,
    pair: EigenPair,
    tol: float = DEFAULT_STATIONARY_TOL,
    max_gen: int = DEFAULT_MAX_GENERATIONS,
    extinction_threshold: float = DEFAULT_EXTINCTION_THRESHOLD,
    full_history: bool = False,
) -> RegimeReport:
    """Decides the regime from (F(0), lambda0) and computes the stationary state."""
    regime = classify_regime(pair.lambda0, g)
    critical = abs(pair.lambda0 - 1.0) <= CRITICAL_BAND
    if critical:
        logger.warning(f"lambda0={pair.lambda0:.9g} is within {CRITICAL_BAND} of 1: expect critical slowdown")

    upper = super_solution_start(op, g)
    n_value = float(upper[0])
    spec = op.kernel
    logger.info(f"Solving for the stationary state: regime={regime.value}, lambda0={pair.lambda0:.12g}")

    if regime is Regime.EXTINCTION:
        down = iterate(op, g, upper, tol, max_gen, full_history, stop_below=extinction_threshold, expect="down")
        if down.monotone_violation > ORDER_SLACK:
            raise InvariantViolation(
                f"iterate from N increased by {down.monotone_violation:.3e} > {ORDER_SLACK:g} in the extinction regime"
            )
        if down.terminated_by is not Termination.BELOW_THRESHOLD:
            hint = " (critical slowdown near lambda0 = 1)" if critical else ""
            raise NoConvergence(
                f"iterate from N stayed above {extinction_threshold:g} for {max_gen} generations{hint}",
                estimate=down.last,
                residual=down.sup_diffs[-1] if down.sup_diffs else None,
            )
        diagnostics = BracketDiagnostics(
            generations=down.generations,
            ordering_violation=0.0,
            upward_monotone_violation=0.0,
            downward_monotone_violation=down.monotone_violation,
            gap=float(down.last.max()),
        )
        stationary = np.zeros(op.size)
        return RegimeReport(
            regime=regime,
            lambda0=pair.lambda0,
            stationary=stationary,
            generations_used=down.generations,
            bracket=Bracket(np.zeros(op.size), upper, 0.0, 0.0, n_value),
            norms=_residual_norms(op, g, stationary),
            downward=down,
            diagnostics=diagnostics,
            critical_slowdown=critical,
        )

    if regime is Regime.PERSISTENCE:
        eps, lower = sub_solution_start(pair, op, g)
        h = math.sqrt(min(g.r0, pair.lambda0)) - 1.0
        gap = float((apply_T(op, g, lower) - lower).min())
    else:
        # T(0) >= 2a * delta * F(0) > 0, so zero is a sub-solution.
        eps, h, lower = 0.0, 0.0, np.zeros(op.size)
        gap = None
    bracket = Bracket(lower, upper, eps, h, n_value, gap)

    upward, downward, diagnostics = _squeeze(op, g, lower, upper, tol, max_gen, full_history)
    if diagnostics.gap > 10 * tol:
        raise BracketMismatch(
            f"upward and downward limits differ by {diagnostics.gap:.3e} > {10 * tol:.1e}; "
            "refine the grid or check the hypotheses",
            gap=diagnostics.gap,
        )

    w = downward.last
    positivity = spec.delta * integrate(op.grid, g(w))
    if float(w.min()) < positivity - tol:
        logger.warning(f"Stationary minimum {w.min():.6g} is below delta * integral F(w) = {positivity:.6g}")
    logger.info(f"Stationary state found after {downward.generations} generations: min={w.min():.12g}, max={w.max():.12g}")
    return RegimeReport(
        regime=regime,
        lambda0=pair.lambda0,
        stationary=w,
        generations_used=downward.generations,
        bracket=bracket,
        norms=_residual_norms(op, g, w),
        downward=downward,
        upward=upward,
        diagnostics=diagnostics,
        positivity_bound=positivity,
        critical_slowdown=critical,
    )


@dataclass(frozen=True)
class ComparisonReport:
    max_violation: float  # max(v - u); expected <= slack
    passed: bool
    super_residual: float  # max(T(u) - u), expected <= slack
    sub_residual: float  # max(v - T(v)), expected <= slack


def comparison_check(
    op: DiscreteOperator, g: GrowthFunction, u: np.ndarray, v: np.ndarray, slack: float = 1e-9
) -> ComparisonReport:
    """A positive super-solution u dominates any sub-solution v."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    super_residual = float((apply_T(op, g, u) - u).max())
    sub_residual = float((v - apply_T(op, g, v)).max())
    problems = []
    if super_residual > slack:
        problems.append(f"u is not a super-solution (T(u) - u reaches {super_residual:.3e})")
    if not u.min() > 0:
        problems.append(f"u is not positive (min {u.min():.3e})")
    if sub_residual > slack:
        problems.append(f"v is not a sub-solution (v - T(v) reaches {sub_residual:.3e})")
    if problems:
        raise PreconditionUnmet("; ".join(problems))
    violation = float((v - u).max())
    return ComparisonReport(violation, violation <= slack, super_residual, sub_residual)


@dataclass(frozen=True)
class UniquenessReport:
    seed: int
    seeds: int
    generations: tuple[int, ...]
    max_pairwise: float
    reference: np.ndarray = field(compare=False)
    passed: bool = True


def _seed_profiles(op: DiscreteOperator, seeds: int, seed: int, upper: float) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    partition = op.grid.partition
    return [random_profile(partition, rng, upper).realize(op.grid.nodes) for _ in range(seeds)]


def _map_seeds(fn, starts: list[np.ndarray], workers: int) -> list:
    if workers <= 1:
        return [fn(u0) for u0 in starts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, starts))


def uniqueness_probe(
    op: DiscreteOperator,
    g: GrowthFunction,
    seeds: int,
    tol: float,
    max_gen: int = DEFAULT_MAX_GENERATIONS,
    seed: int = DEFAULT_SEED,
    lambda0: float | None = None,
    workers: int = 1,
) -> UniquenessReport:
    """Iterates from random step profiles in X and checks every limit is the same."""
    if seeds < 2:
        raise ValueError(f"seeds must be >= 2, got {seeds}")
    if lambda0 is not None and classify_regime(lambda0, g) is Regime.EXTINCTION:
        raise PreconditionUnmet("uniqueness of a positive state needs a persistence scenario")

    n_value = float(super_solution_start(op, g)[0])
    starts = _seed_profiles(op, seeds, seed, n_value)
    run_tol = max(tol * 1e-2, 1e-14)

    def run(u0):
        traj = iterate(op, g, u0, run_tol, max_gen)
        if traj.terminated_by is not Termination.TOLERANCE_MET:
            raise NoConvergence(f"seed run did not converge in {max_gen} generations", estimate=traj.last)
        return traj

    runs = _map_seeds(run, starts, workers)
    limits = np.stack([t.last for t in runs])
    spread = float((limits.max(axis=0) - limits.min(axis=0)).max())
    logger.info(f"Uniqueness probe over {seeds} seeds: max pairwise sup distance {spread:.3e}")
    if spread > tol:
        raise Disagreement(f"seed limits differ by {spread:.3e} > {tol:.1e}", max_pairwise=spread)
    return UniquenessReport(seed, seeds, tuple(t.generations for t in runs), spread, limits[0])


@dataclass(frozen=True)
class DecayReport:
    seed: int
    threshold: float
    generations: tuple[int, ...]
    final_sup: tuple[float, ...]
    passed: bool


def decay_probe(
    op: DiscreteOperator,
    g: GrowthFunction,
    seeds: int,
    threshold: float = 1e-8,
    max_gen: int = 10_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
) -> DecayReport:
    """Extinction from arbitrary data: every random step profile falls below threshold."""
    if g.f0 > 0:
        raise PreconditionUnmet("with influx the population never dies out")
    n_value = float(super_solution_start(op, g)[0])
    starts = _seed_profiles(op, seeds, seed, n_value)
    runs = _map_seeds(lambda u0: iterate(op, g, u0, threshold, max_gen, stop_below=threshold), starts, workers)
    passed = all(t.terminated_by is Termination.BELOW_THRESHOLD for t in runs)
    if not passed:
        logger.warning(f"Some seeds stayed above {threshold:g} after {max_gen} generations")
    return DecayReport(
        seed=seed,
        threshold=threshold,
        generations=tuple(t.generations for t in runs),
        final_sup=tuple(float(t.last.max()) for t in runs),
        passed=passed,
    )
