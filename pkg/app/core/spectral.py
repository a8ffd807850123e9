# app/core/spectral.py

"""
Principal eigenpair of the discretized linearization r0 * K.

K has strictly positive entries, so Perron-Frobenius guarantees a simple
dominant eigenvalue with a positive eigenvector and power iteration from the
constant vector converges to it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from loguru import logger

from app.core.discretize import DiscreteOperator, Grid, integrate
from app.core.errors import NonPositiveIterate, NoConvergence
from app.core.landscape import GrowthFunction, KernelSpec, kernel_mass

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 100_000
# Residual that has not improved for this many steps is a plateau.
STALL_WINDOW = 5_000


@dataclass(frozen=True, eq=False)
class EigenPair:
    lambda0: float
    phi0: np.ndarray  # sup-norm 1, strictly positive
    residual: float
    iterations: int
    r0: float

    def summary(self, grid: Grid) -> dict:
        return {
            "lambda0": self.lambda0,
            "residual": self.residual,
            "iterations": self.iterations,
            "phi0_min": float(self.phi0.min()),
            "phi0_integral": integrate(grid, self.phi0),
        }


@dataclass(frozen=True)
class BoundReport:
    lambda0: float
    lower_bound: float
    passed: bool
    phi0_min: float
    phi0_integral: float
    positivity_bound: float
    positivity_passed: bool


@dataclass(frozen=True)
class MortalityReport:
    max_kernel_mass: float
    r0: float
    hypotheses_hold: bool
    lambda0: float
    conclusion_confirmed: bool | None  # None when the hypotheses fail


def principal_eigen(
    op: DiscreteOperator, r0: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> EigenPair:
    """Power iteration on r0 * K with sup-norm normalization, started from the constant 1."""
    if not tol > 0 or max_iter < 1:
        raise ValueError(f"need tol > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}")

    phi = np.ones(op.size)
    previous = None
    best_residual, best_at = np.inf, 0
    for iteration in range(1, max_iter + 1):
        z = r0 * (op.matrix @ phi)
        if not np.all(z > 0):
            raise NonPositiveIterate(
                f"power iterate lost positivity at step {iteration}; check the kernel lower bound"
            )
        estimate = float(z.max())
        residual = float(np.abs(z - estimate * phi).max())
        drift_ok = previous is None or abs(estimate - previous) < tol * estimate
        if residual < tol and drift_ok:
            logger.debug(f"Power iteration converged in {iteration} steps: lambda0={estimate!r}")
            return EigenPair(estimate, phi, residual, iteration, r0)

        if residual < best_residual:
            best_residual, best_at = residual, iteration
        elif iteration - best_at > STALL_WINDOW:
            raise NoConvergence(
                f"power iteration residual plateaued at {best_residual:.3e}; "
                "the principal eigenvalue looks degenerate",
                estimate=estimate,
                residual=residual,
            )
        previous = estimate
        phi = z / estimate

    raise NoConvergence(
        f"power iteration did not converge in {max_iter} steps (lambda0~{estimate:.12g}, residual={residual:.3e})",
        estimate=estimate,
        residual=residual,
    )


def check_spectral_lower_bound(
    pair: EigenPair, spec: KernelSpec, r0: float, grid: Grid, tol_bound: float = 1e-9
) -> BoundReport:
    """lambda0 >= r0 * delta * |Omega|, and inf phi0 >= (r0 * delta / lambda0) * integral of phi0."""
    lower = r0 * spec.delta * spec.partition.length
    phi_min = float(pair.phi0.min())
    phi_int = integrate(grid, pair.phi0)
    positivity = r0 * spec.delta / pair.lambda0 * phi_int
    report = BoundReport(
        lambda0=pair.lambda0,
        lower_bound=lower,
        passed=pair.lambda0 >= lower - tol_bound,
        phi0_min=phi_min,
        phi0_integral=phi_int,
        positivity_bound=positivity,
        positivity_passed=phi_min >= positivity - tol_bound,
    )
    if not report.passed:
        logger.warning(f"Spectral lower bound violated: lambda0={pair.lambda0:.6g} < {lower:.6g}")
    return report


def check_mortality_regime(
    op: DiscreteOperator,
    g: GrowthFunction,
    grid: Grid,
    pair: EigenPair | None = None,
    tol: float = 1e-12,
) -> MortalityReport:
    """Mortality regime: masses <= 1 and r0 <= 1 force lambda0 <= 1."""
    masses = np.array([kernel_mass(op.kernel, float(x), grid) for x in grid.nodes])
    max_mass = float(masses.max())
    if pair is None or pair.r0 != g.r0:
        pair = principal_eigen(op, g.r0)
    hypotheses = max_mass <= 1 + tol and g.r0 <= 1
    confirmed = (pair.lambda0 <= 1 + tol) if hypotheses else None
    if hypotheses and not confirmed:
        logger.warning(f"Mortality regime not confirmed: lambda0={pair.lambda0:.12g} > 1")
    return MortalityReport(max_mass, g.r0, hypotheses, pair.lambda0, confirmed)


def patch_reduced_matrix(spec: KernelSpec, r0: float) -> np.ndarray:
    """[r0 * c_ij * |Omega_j|], exact for block-constant kernels."""
    if not spec.is_block_constant:
        raise ValueError("patch reduction is only exact for block-constant kernels")
    return r0 * spec.block_coefficients() * spec.partition.patch_lengths[None, :]


def patch_reduced_radius(spec: KernelSpec, r0: float) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(patch_reduced_matrix(spec, r0)))))
