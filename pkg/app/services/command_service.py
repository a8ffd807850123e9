# app/services/command_service.py

from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from loguru import logger

from app.core.discretize import Grid, integrate
from app.core.dynamics import (
    Regime,
    RegimeReport,
    comparison_check,
    decay_probe,
    iterate,
    monotone_bracket_check,
    solve_stationary,
    sub_solution_start,
    uniqueness_probe,
)
from app.core.errors import NUMERICAL_ERRORS, ConfigValidationError
from app.core.landscape import validate_assumptions
from app.core.spectral import (
    check_mortality_regime,
    check_spectral_lower_bound,
    patch_reduced_radius,
)
from app.core.threshold import critical_r0, sweep
from app.services.scenario_service import PreparedScenario, profile_from_config, sweep_from_config

ORACLE_RTOL = 1e-10

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFY_FAILED = 4


@dataclass
class CommandResult:
    command: str
    results: dict
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    exit_code: int = EXIT_OK


def _node_table(grid: Grid, column: str, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"x": grid.nodes, column: values, "patch_index": grid.patch_of_node})


def _norm_history(report: RegimeReport) -> pd.DataFrame:
    t = report.downward
    return pd.DataFrame({"n": np.arange(1, t.generations + 1), "sup_diff": t.sup_diffs, "l2_diff": t.l2_diffs})


def _oracle(prep: PreparedScenario) -> dict | None:
    kernel = prep.scenario.kernel
    if not kernel.is_block_constant:
        return None
    radius = patch_reduced_radius(kernel, prep.scenario.growth.r0)
    rel = abs(prep.eigenpair.lambda0 - radius) / radius
    return {"patch_reduced_radius": radius, "relative_error": rel, "passed": rel <= ORACLE_RTOL}


def run_eigen(prep: PreparedScenario) -> CommandResult:
    scenario, grid, op, pair = prep.scenario, prep.grid, prep.operator, prep.eigenpair
    tol = prep.config.tolerances
    bound = check_spectral_lower_bound(pair, scenario.kernel, scenario.growth.r0, grid)
    mortality = check_mortality_regime(op, scenario.growth, grid, pair)
    results = {
        "eigenpair": pair.summary(grid),
        "spectral_lower_bound": asdict(bound),
        "mortality": asdict(mortality),
        "critical_r0": critical_r0(op, tol.eigen_tol, tol.eigen_max_iter),
        "oracle": _oracle(prep),
    }
    return CommandResult("eigen", results, {"eigenfunction": _node_table(grid, "phi0", pair.phi0)})


def _regime_summary(report: RegimeReport) -> dict:
    b = report.bracket
    return {
        "regime": report.regime.value,
        "lambda0": report.lambda0,
        "generations_used": report.generations_used,
        "residuals": report.norms,
        "stationary_min": float(report.stationary.min()),
        "stationary_max": float(report.stationary.max()),
        "positivity_bound": report.positivity_bound,
        "critical_slowdown": report.critical_slowdown,
        "bracket": {"epsilon": b.epsilon, "h": b.h, "N": b.N_value, "lower_gap": b.lower_gap},
        "diagnostics": asdict(report.diagnostics) if report.diagnostics else None,
        "terminated_by": report.downward.terminated_by.value,
        "norm_consistent": report.downward.norm_consistent,
    }


def run_simulate(prep: PreparedScenario) -> CommandResult:
    grid, op, g, pair = prep.grid, prep.operator, prep.scenario.growth, prep.eigenpair
    tol = prep.config.tolerances
    full_history = prep.config.output.full_history
    report = solve_stationary(
        op, g, pair, tol.stationary_tol, tol.max_generations, tol.extinction_threshold, full_history
    )
    results = {"eigenpair": pair.summary(grid), "stationary": _regime_summary(report)}
    tables = {"profile": _node_table(grid, "w", report.stationary), "norm_history": _norm_history(report)}

    profile = profile_from_config(prep.config)
    if profile is not None:
        u0 = profile.realize(grid.nodes)
        if report.regime is Regime.EXTINCTION:
            run = iterate(op, g, u0, tol.stationary_tol, tol.max_generations, stop_below=tol.extinction_threshold)
        else:
            run = iterate(op, g, u0, tol.stationary_tol, tol.max_generations)
        results["initial_profile_run"] = {
            "generations": run.generations,
            "terminated_by": run.terminated_by.value,
            "distance_to_stationary": float(np.abs(run.last - report.stationary).max()),
        }

    if full_history:
        rows = [
            pd.DataFrame({"n": n, "x": grid.nodes, "u": u})
            for n, u in enumerate(report.downward.iterates)
        ]
        tables["trajectory"] = pd.concat(rows, ignore_index=True)
    return CommandResult("simulate", results, tables)


def run_threshold(prep: PreparedScenario) -> CommandResult:
    spec = sweep_from_config(prep.config)
    if spec is None:
        raise ConfigValidationError(["threshold: a sweep section is required for the threshold command"])
    tol = prep.config.tolerances
    table = sweep(prep.scenario, spec, tol.eigen_tol, tol.eigen_max_iter, prep.config.workers)
    results = {
        "critical_r0": critical_r0(prep.operator, tol.eigen_tol, tol.eigen_max_iter),
        "sweep": {"parameter": spec.parameter, "lo": spec.lo, "hi": spec.hi, "samples": spec.samples},
        "crossings": [asdict(c) for c in table.crossings],
        "endpoint_warnings": list(table.endpoint_warnings),
    }
    return CommandResult("threshold", results, {"phase_table": table.to_frame(), "crossings": table.crossings_frame()})


def _check(name: str, passed: bool, detail: str, advisory: bool = False, **witness) -> dict:
    return {"name": name, "passed": bool(passed), "advisory": advisory, "detail": detail, "witness": witness}


def _spectral_checks(prep: PreparedScenario) -> list[dict]:
    scenario, grid, op, pair = prep.scenario, prep.grid, prep.operator, prep.eigenpair
    g = scenario.growth
    bound = check_spectral_lower_bound(pair, scenario.kernel, g.r0, grid)
    checks = [
        _check(
            "spectral_lower_bound",
            bound.passed,
            f"lambda0={bound.lambda0:.12g} >= r0*delta*|Omega|={bound.lower_bound:.12g}",
        ),
        _check(
            "eigenfunction_positivity",
            bound.positivity_passed,
            f"inf phi0={bound.phi0_min:.12g} >= (r0*delta/lambda0)*int phi0={bound.positivity_bound:.12g}",
        ),
    ]
    oracle = _oracle(prep)
    if oracle is not None:
        checks.append(
            _check(
                "patch_reduced_oracle",
                oracle["passed"],
                f"lambda0 vs patch-reduced radius {oracle['patch_reduced_radius']:.12g} "
                f"(rel err {oracle['relative_error']:.2e})",
            )
        )
    mortality = check_mortality_regime(op, g, grid, pair)
    state = "hypotheses hold" if mortality.hypotheses_hold else "hypotheses do not hold, nothing asserted"
    checks.append(
        _check(
            "mortality_regime",
            mortality.conclusion_confirmed is not False,
            f"max kernel mass {mortality.max_kernel_mass:.6g}, r0={g.r0:.6g}: {state}",
        )
    )
    return checks


def _dynamics_checks(prep: PreparedScenario) -> tuple[list[dict], Regime]:
    config = prep.config
    scenario, op, pair = prep.scenario, prep.operator, prep.eigenpair
    kernel, g = scenario.kernel, scenario.growth
    tol, ver = config.tolerances, config.verification
    checks = []

    stationary = solve_stationary(op, g, pair, tol.stationary_tol, tol.max_generations, tol.extinction_threshold)
    upper = stationary.bracket.upper_start
    if stationary.regime is Regime.PERSISTENCE:
        _, lower = sub_solution_start(pair, op, g)
    else:
        lower = np.zeros(op.size)

    diag = monotone_bracket_check(op, g, lower, upper, ver.bracket_generations)
    checks.append(
        _check(
            "bracket_monotone_short_run",
            diag.passed,
            f"{diag.generations} generations: ordering {diag.ordering_violation:.2e}, "
            f"upward {diag.upward_monotone_violation:.2e}, downward {diag.downward_monotone_violation:.2e}",
        )
    )
    comparison = comparison_check(op, g, upper, lower)
    checks.append(_check("comparison_principle", comparison.passed, f"max(v - u) = {comparison.max_violation:.3e}"))

    full = stationary.diagnostics
    checks.append(
        _check(
            "bracket_monotone_full_run",
            full.passed,
            f"{full.generations} generations, ordering violation {full.ordering_violation:.2e}",
        )
    )
    checks.append(
        _check(
            "stationary_residual",
            stationary.norms["sup"] <= 10 * tol.stationary_tol,
            f"sup |T(w) - w| = {stationary.norms['sup']:.3e}",
        )
    )

    if stationary.regime is Regime.EXTINCTION:
        decay = decay_probe(
            op, g, ver.uniqueness_seeds, ver.decay_threshold, ver.decay_max_generations, config.seed, config.workers
        )
        checks.append(
            _check(
                "extinction_from_random_data",
                decay.passed,
                f"{len(decay.generations)} seeds, generations {list(decay.generations)}",
                seed=decay.seed,
            )
        )
        return checks, stationary.regime

    w = stationary.stationary
    checks.append(
        _check(
            "stationary_positivity",
            w.min() > 0 and w.min() >= stationary.positivity_bound - tol.stationary_tol,
            f"min w = {w.min():.12g} >= delta * int F(w) = {stationary.positivity_bound:.12g}",
        )
    )
    if g.f0 > 0:
        floor = kernel.delta * scenario.partition.length * g.f0
        checks.append(
            _check("influx_floor", w.min() > floor - 1e-12, f"min w = {w.min():.12g} > 2a*delta*F(0) = {floor:.12g}")
        )
    probe = uniqueness_probe(
        op, g, ver.uniqueness_seeds, ver.uniqueness_tol, tol.max_generations, config.seed, pair.lambda0, config.workers
    )
    checks.append(
        _check(
            "uniqueness_from_random_data",
            probe.passed,
            f"{probe.seeds} seeds agree within {probe.max_pairwise:.3e}",
            seed=probe.seed,
        )
    )
    return checks, stationary.regime


def run_verify(prep: PreparedScenario) -> CommandResult:
    """Every executable hypothesis and conclusion on one scenario; any hard failure exits 4."""
    config = prep.config
    kernel, g = prep.scenario.kernel, prep.scenario.growth
    report = validate_assumptions(kernel, g, config.verification.sample_count)
    checks = [_check(c.name, c.passed, c.detail, c.advisory, **c.witness) for c in report.checks]
    checks.extend(_spectral_checks(prep))

    regime = None
    try:
        dynamics, regime = _dynamics_checks(prep)
        checks.extend(dynamics)
    except NUMERICAL_ERRORS as e:
        # With a hypothesis already failing, a breakdown of the dynamics is one more finding.
        if report.passed:
            raise
        checks.append(_check("dynamics", False, f"{type(e).__name__}: {e}"))

    hard_failures = [c["name"] for c in checks if not c["passed"] and not c["advisory"]]
    for name in hard_failures:
        logger.error(f"Verification check failed: {name}")
    results = {
        "passed": not hard_failures,
        "failed_checks": hard_failures,
        "regime": regime.value if regime else None,
        "lambda0": prep.eigenpair.lambda0,
        "phi0_integral": integrate(prep.grid, prep.eigenpair.phi0),
        "checks": checks,
    }
    return CommandResult("verify", results, {}, EXIT_OK if not hard_failures else EXIT_VERIFY_FAILED)


COMMANDS = {
    "eigen": run_eigen,
    "simulate": run_simulate,
    "threshold": run_threshold,
    "verify": run_verify,
}
