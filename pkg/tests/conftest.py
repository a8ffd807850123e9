import pytest
from loguru import logger

from app.core.discretize import assemble_operator, build_grid
from app.core.landscape import GrowthFunction, KernelPiece, KernelSpec, PatchPartition, Scenario


@pytest.fixture(autouse=True)
def _quiet_logs():
    logger.remove()
    yield
    logger.remove()


def two_patch_kernel(cross: float = 0.2, delta: float = 0.19, lambda_bound: float = 0.6) -> KernelSpec:
    partition = PatchPartition(1.0, (0.0,))
    pieces = {
        (0, 0): KernelPiece("constant", 0.6),
        (0, 1): KernelPiece("constant", cross),
        (1, 0): KernelPiece("constant", cross),
        (1, 1): KernelPiece("constant", 0.6),
    }
    return KernelSpec.from_pairs(partition, pieces, delta, lambda_bound)


def exponential_kernel() -> KernelSpec:
    partition = PatchPartition(1.0, (0.0,))
    pieces = {
        (0, 0): KernelPiece("exponential", 1.0, 2.0),
        (0, 1): KernelPiece("constant", 0.3),
        (1, 0): KernelPiece("constant", 0.3),
        (1, 1): KernelPiece("exponential", 0.5, 1.0),
    }
    return KernelSpec.from_pairs(partition, pieces, 0.1, 1.0)


def operator_for(spec: KernelSpec, panels: int = 2, order: int = 4):
    return assemble_operator(spec, build_grid(spec.partition, panels, order))


@pytest.fixture
def rank_one_kernel() -> KernelSpec:
    """k = 1 on (-1/2, 1/2)."""
    return KernelSpec.constant(PatchPartition(0.5), 1.0, delta=0.5, lambda_bound=1.5)


@pytest.fixture
def rank_one_op(rank_one_kernel):
    return operator_for(rank_one_kernel)


@pytest.fixture
def two_patch() -> KernelSpec:
    return two_patch_kernel()


@pytest.fixture
def two_patch_op(two_patch):
    return operator_for(two_patch)


@pytest.fixture
def exponential() -> KernelSpec:
    return exponential_kernel()


@pytest.fixture
def exponential_op(exponential):
    return operator_for(exponential, panels=4, order=6)


@pytest.fixture
def bh2() -> GrowthFunction:
    return GrowthFunction.beverton_holt(r0=2.0, b=1.0)


@pytest.fixture
def bh12() -> GrowthFunction:
    return GrowthFunction.beverton_holt(r0=1.2, b=1.0)


@pytest.fixture
def influx() -> GrowthFunction:
    return GrowthFunction.with_influx(c=0.1, r0=1.2, b=1.0)


@pytest.fixture
def two_patch_scenario(two_patch, bh2) -> Scenario:
    return Scenario(two_patch.partition, two_patch, bh2)


@pytest.fixture
def make_op():
    return operator_for


@pytest.fixture
def make_two_patch():
    return two_patch_kernel
