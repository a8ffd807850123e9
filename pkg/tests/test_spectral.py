import numpy as np
import pytest

from app.core.discretize import assemble_operator, build_grid, integrate
from app.core.errors import NoConvergence
from app.core.landscape import GrowthFunction, KernelPiece, KernelSpec, PatchPartition
from app.core.spectral import (
    check_mortality_regime,
    check_spectral_lower_bound,
    patch_reduced_matrix,
    patch_reduced_radius,
    principal_eigen,
)


def test_rank_one_converges_in_one_step(rank_one_op):
    pair = principal_eigen(rank_one_op, 2.0)
    assert pair.lambda0 == pytest.approx(2.0, rel=1e-10)
    np.testing.assert_allclose(pair.phi0, 1.0, atol=1e-10)
    assert pair.iterations == 1


@pytest.mark.parametrize("r0, expected", [(2.0, 1.6), (1.2, 0.96), (1.0, 0.8), (0.9, 0.72)])
def test_two_patch_eigenvalue(two_patch_op, r0, expected):
    pair = principal_eigen(two_patch_op, r0)
    assert pair.lambda0 == pytest.approx(expected, rel=1e-10)
    np.testing.assert_allclose(pair.phi0, 1.0, atol=1e-10)


def test_patch_reduced_oracle(two_patch):
    reduced = patch_reduced_matrix(two_patch, 2.0)
    np.testing.assert_allclose(reduced, [[1.2, 0.4], [0.4, 1.2]])
    assert patch_reduced_radius(two_patch, 2.0) == pytest.approx(1.6, rel=1e-14)
    dense = 2.0 * np.max(np.abs(np.linalg.eigvals(np.array([[0.6, 0.2], [0.2, 0.6]]))))
    assert patch_reduced_radius(two_patch, 2.0) == pytest.approx(dense, rel=1e-14)


@pytest.mark.parametrize("panels", [1, 2, 4, 8])
@pytest.mark.parametrize("order", [2, 4, 8])
def test_block_kernel_matches_oracle_at_every_resolution(two_patch, panels, order):
    op = assemble_operator(two_patch, build_grid(two_patch.partition, panels, order))
    assert principal_eigen(op, 2.0).lambda0 == pytest.approx(patch_reduced_radius(two_patch, 2.0), rel=1e-10)


def test_unequal_patches_match_oracle():
    partition = PatchPartition(1.0, (-0.5, 0.3))
    c = np.array([[0.9, 0.2, 0.3], [0.25, 0.5, 0.2], [0.4, 0.3, 0.7]])
    pieces = {(i, j): KernelPiece("constant", float(c[i, j])) for i in range(3) for j in range(3)}
    spec = KernelSpec.from_pairs(partition, pieces, 0.1, 1.0)
    op = assemble_operator(spec, build_grid(partition, 3, 5))
    pair = principal_eigen(op, 1.5)
    assert pair.lambda0 == pytest.approx(patch_reduced_radius(spec, 1.5), rel=1e-10)


def test_eigenvalue_is_linear_in_r0(make_op, exponential):
    op = make_op(exponential, panels=2, order=4)
    base = principal_eigen(op, 1.0, tol=1e-14).lambda0
    assert principal_eigen(op, 3.0, tol=1e-14).lambda0 == pytest.approx(3.0 * base, rel=1e-12)


def test_eigenfunction_is_positive_and_normalized(exponential_op):
    pair = principal_eigen(exponential_op, 2.0)
    assert pair.phi0.max() == pytest.approx(1.0, abs=1e-12)
    assert pair.phi0.min() > 0
    np.testing.assert_allclose(
        2.0 * exponential_op.matrix @ pair.phi0, pair.lambda0 * pair.phi0, atol=1e-10
    )


def test_power_iteration_budget(exponential_op):
    with pytest.raises(NoConvergence) as err:
        principal_eigen(exponential_op, 2.0, max_iter=1)
    assert err.value.estimate > 0


def test_spectral_lower_bound_two_patch(two_patch_op, two_patch):
    pair = principal_eigen(two_patch_op, 2.0)
    report = check_spectral_lower_bound(pair, two_patch, 2.0, two_patch_op.grid)
    assert report.lower_bound == pytest.approx(0.76)
    assert report.passed
    assert report.positivity_passed


def test_spectral_lower_bound_rank_one(rank_one_op, rank_one_kernel):
    pair = principal_eigen(rank_one_op, 2.0)
    report = check_spectral_lower_bound(pair, rank_one_kernel, 2.0, rank_one_op.grid)
    assert report.lower_bound == pytest.approx(1.0)
    assert report.passed


def test_spectral_lower_bound_detects_misdeclared_delta(rank_one_op):
    pair = principal_eigen(rank_one_op, 2.0)
    wrong = KernelSpec.constant(PatchPartition(0.5), 1.0, delta=2.5, lambda_bound=3.0)
    report = check_spectral_lower_bound(pair, wrong, 2.0, rank_one_op.grid)
    assert report.lower_bound == pytest.approx(5.0)
    assert not report.passed


def test_eigenfunction_positivity_bound(exponential_op, exponential):
    pair = principal_eigen(exponential_op, 2.0)
    report = check_spectral_lower_bound(pair, exponential, 2.0, exponential_op.grid)
    assert report.phi0_integral == pytest.approx(integrate(exponential_op.grid, pair.phi0))
    assert report.phi0_min >= report.positivity_bound - 1e-9
    assert report.passed and report.positivity_passed


@pytest.mark.parametrize("r0, expected", [(1.0, 0.8), (0.9, 0.72)])
def test_mortality_regime_confirmed(two_patch_op, r0, expected):
    report = check_mortality_regime(two_patch_op, GrowthFunction.beverton_holt(r0, 1.0), two_patch_op.grid)
    assert report.max_kernel_mass == pytest.approx(0.8, abs=1e-12)
    assert report.hypotheses_hold
    assert report.lambda0 == pytest.approx(expected, rel=1e-10)
    assert report.conclusion_confirmed is True


def test_mortality_hypotheses_fail_on_heavy_kernel(make_op):
    heavy = KernelSpec.constant(PatchPartition(1.0), 1.0, 0.5, 1.5)
    op = make_op(heavy)
    report = check_mortality_regime(op, GrowthFunction.beverton_holt(0.9, 1.0), op.grid)
    assert report.max_kernel_mass == pytest.approx(2.0, abs=1e-12)
    assert not report.hypotheses_hold
    assert report.conclusion_confirmed is None
