import math

import numpy as np
import pytest

from app.core.discretize import (
    apply_T,
    apply_T0,
    assemble_operator,
    build_grid,
    integrate,
    weighted_l2,
)
from app.core.errors import DimensionMismatch, InvalidResolution
from app.core.landscape import GrowthFunction, KernelSpec, PatchPartition, kernel_mass
from app.core.spectral import principal_eigen


def test_two_point_rule_on_two_patches():
    grid = build_grid(PatchPartition(1.0, (0.0,)), 1, 2)
    s = 1 / math.sqrt(3)
    expected = [-0.5 - 0.5 * s, -0.5 + 0.5 * s, 0.5 - 0.5 * s, 0.5 + 0.5 * s]
    np.testing.assert_allclose(grid.nodes, expected, atol=1e-15)
    np.testing.assert_allclose(grid.weights, 0.5, atol=1e-15)
    assert grid.patch_of_node.tolist() == [0, 0, 1, 1]
    assert grid.rule == "gauss-legendre-2"


def test_single_node_grid():
    grid = build_grid(PatchPartition(0.5), 1, 1)
    assert grid.nodes.tolist() == [0.0]
    assert grid.weights.tolist() == [1.0]


@pytest.mark.parametrize("panels", [1, 3, 8])
@pytest.mark.parametrize("order", [1, 2, 5, 16])
@pytest.mark.parametrize("interfaces", [(), (0.0,), (-0.7, 0.2, 0.25)])
def test_weights_integrate_constants(panels, order, interfaces):
    grid = build_grid(PatchPartition(1.0, interfaces), panels, order)
    assert grid.weights.sum() == pytest.approx(2.0, abs=1e-13)
    assert grid.size == panels * order * (len(interfaces) + 1)
    # every interface is a panel edge and no node touches one
    assert set(interfaces) <= set(grid.panels.ravel().tolist())
    ends = grid.panels[grid.panel_of_node]
    assert np.all((grid.nodes > ends[:, 0]) & (grid.nodes < ends[:, 1]))


@pytest.mark.parametrize("panels, order", [(0, 4), (2, 0), (2, 17), (1.5, 4)])
def test_build_grid_rejects_bad_resolution(panels, order):
    with pytest.raises(InvalidResolution):
        build_grid(PatchPartition(1.0), panels, order)


def test_assemble_rank_one_single_node(rank_one_kernel):
    op = assemble_operator(rank_one_kernel, build_grid(rank_one_kernel.partition, 1, 1))
    assert op.matrix.tolist() == [[1.0]]


def test_assemble_two_patch_blocks(two_patch):
    op = assemble_operator(two_patch, build_grid(two_patch.partition, 1, 2))
    expected = np.array(
        [
            [0.3, 0.3, 0.1, 0.1],
            [0.3, 0.3, 0.1, 0.1],
            [0.1, 0.1, 0.3, 0.3],
            [0.1, 0.1, 0.3, 0.3],
        ]
    )
    np.testing.assert_allclose(op.matrix, expected, atol=1e-15)
    np.testing.assert_allclose(op.matrix.sum(axis=1), 0.8, atol=1e-15)
    assert not op.matrix.flags.writeable


@pytest.mark.parametrize("panels, order", [(4, 6), (8, 7)])
def test_row_sums_match_kernel_mass(exponential, panels, order):
    op = assemble_operator(exponential, build_grid(exponential.partition, panels, order))
    ones = np.ones(op.size)
    masses = [kernel_mass(exponential, float(x), op.grid) for x in op.grid.nodes]
    np.testing.assert_array_equal([row @ ones for row in op.matrix], masses)


def test_assemble_rejects_foreign_grid(two_patch):
    with pytest.raises(DimensionMismatch):
        assemble_operator(two_patch, build_grid(PatchPartition(1.0), 2, 2))


def test_apply_T(rank_one_op, two_patch_op):
    bh = GrowthFunction.beverton_holt(2.0, 1.0)
    np.testing.assert_allclose(apply_T(rank_one_op, bh, np.ones(rank_one_op.size)), 1.0, atol=1e-14)
    assert np.all(apply_T(two_patch_op, bh, np.zeros(two_patch_op.size)) == 0.0)

    influx = GrowthFunction.with_influx(0.1, 2.0, 1.0)
    np.testing.assert_allclose(apply_T(rank_one_op, influx, np.zeros(rank_one_op.size)), 0.1, atol=1e-15)


def test_apply_T_is_monotone(exponential_op):
    bh = GrowthFunction.beverton_holt(2.0, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(10):
        u = 3 * rng.random(exponential_op.size)
        v = u + rng.random(exponential_op.size)
        assert np.all(apply_T(exponential_op, bh, u) <= apply_T(exponential_op, bh, v))


def test_apply_T0(rank_one_op, two_patch_op):
    np.testing.assert_allclose(apply_T0(rank_one_op, 2.0, np.ones(rank_one_op.size)), 2.0, atol=1e-14)

    j = 5
    e_j = np.zeros(two_patch_op.size)
    e_j[j] = 1.0
    np.testing.assert_array_equal(apply_T0(two_patch_op, 1.0, e_j), two_patch_op.matrix[:, j])

    rng = np.random.default_rng(0)
    u, v = rng.random(two_patch_op.size), rng.random(two_patch_op.size)
    np.testing.assert_allclose(
        apply_T0(two_patch_op, 1.5, 2 * u + 3 * v),
        2 * apply_T0(two_patch_op, 1.5, u) + 3 * apply_T0(two_patch_op, 1.5, v),
        rtol=1e-13,
    )


def test_operators_check_vector_length(two_patch_op):
    with pytest.raises(DimensionMismatch):
        apply_T(two_patch_op, GrowthFunction.beverton_holt(2.0, 1.0), np.ones(3))
    with pytest.raises(DimensionMismatch):
        apply_T0(two_patch_op, 2.0, np.ones((two_patch_op.size, 1)))


def test_integrate_and_weighted_l2(two_patch_op):
    grid = two_patch_op.grid
    assert integrate(grid, np.ones(grid.size)) == pytest.approx(2.0, abs=1e-14)
    assert integrate(grid, grid.nodes**2) == pytest.approx(2 / 3, abs=1e-14)
    assert weighted_l2(grid, np.full(grid.size, 3.0)) == pytest.approx(3 * math.sqrt(2), abs=1e-13)


def test_eigenvalue_converges_under_refinement(exponential):
    lams = []
    for panels in (2, 4, 8, 16):
        op = assemble_operator(exponential, build_grid(exponential.partition, panels, 4))
        lams.append(principal_eigen(op, 2.0).lambda0)
    steps = np.abs(np.diff(lams))
    ratios = steps[:-1] / steps[1:]
    # |x - y| kink inside the diagonal panel: second order in the panel width
    assert np.all(ratios > 3), ratios
    assert math.log2(ratios[-1]) == pytest.approx(2.0, abs=0.4)


def test_constant_kernel_is_resolution_independent():
    spec = KernelSpec.constant(PatchPartition(0.5), 1.0, 0.5, 1.5)
    for panels, order in [(1, 1), (3, 2), (8, 7)]:
        op = assemble_operator(spec, build_grid(spec.partition, panels, order))
        assert principal_eigen(op, 2.0).lambda0 == pytest.approx(2.0, rel=1e-12)
