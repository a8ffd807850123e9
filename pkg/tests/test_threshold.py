import numpy as np
import pytest

from app.core import threshold
from app.core.discretize import Resolution
from app.core.dynamics import Regime
from app.core.errors import NonMonotoneCrossing
from app.core.landscape import GrowthFunction, KernelPiece, KernelSpec, PatchPartition, Scenario
from app.core.spectral import principal_eigen
from app.core.threshold import PhaseRow, SweepSpec, critical_r0, sweep


def test_critical_r0_two_patch(two_patch_op):
    assert critical_r0(two_patch_op) == pytest.approx(1.25, rel=1e-12)


@pytest.mark.parametrize("half_length, expected", [(0.5, 1.0), (1.0, 0.5)])
def test_critical_r0_constant_kernel(make_op, half_length, expected):
    op = make_op(KernelSpec.constant(PatchPartition(half_length), 1.0, 0.5, 1.5))
    assert critical_r0(op) == pytest.approx(expected, rel=1e-12)


def test_critical_r0_exponential_kernel(exponential_op):
    r_star = critical_r0(exponential_op)
    assert principal_eigen(exponential_op, r_star).lambda0 == pytest.approx(1.0, abs=1e-10)


def test_r0_sweep_matches_closed_form(two_patch_scenario, two_patch_op):
    table = sweep(two_patch_scenario, SweepSpec("r0", 1.0, 2.0, 11, resolution=Resolution(2, 4)))
    assert len(table.rows) == 11
    assert [r.regime for r in table.rows[:3]] == [Regime.EXTINCTION] * 3
    assert all(r.regime is Regime.PERSISTENCE for r in table.rows[3:])
    [crossing] = table.crossings
    assert (crossing.lo, crossing.hi) == pytest.approx((1.2, 1.3))
    assert crossing.value == pytest.approx(critical_r0(two_patch_op), rel=1e-6)
    assert crossing.value == pytest.approx(1.25, abs=1e-6)


def test_domain_sweep_finds_critical_half_length():
    partition = PatchPartition(0.5)
    kernel = KernelSpec.constant(partition, 1.0, 0.5, 1.5)
    base = Scenario(partition, kernel, GrowthFunction.beverton_holt(1.2, 1.0))
    table = sweep(base, SweepSpec("domain_half_length", 0.25, 1.0, 11, resolution=Resolution(2, 4)))
    [crossing] = table.crossings
    assert crossing.value == pytest.approx(1 / 2.4, abs=1e-6)
    lams = np.array([r.lambda0 for r in table.rows])
    np.testing.assert_allclose(lams, 1.2 * 2 * table.to_frame()["parameter"].to_numpy(), rtol=1e-10)


def test_coupling_sweep(make_two_patch):
    kernel = make_two_patch()
    base = Scenario(kernel.partition, kernel, GrowthFunction.beverton_holt(1.2, 1.0))
    spec = SweepSpec("kernel_coefficient", 0.0, 0.6, 13, pairs=((0, 1), (1, 0)), resolution=Resolution(2, 4))
    table = sweep(base, spec)
    [crossing] = table.crossings
    assert crossing.value == pytest.approx(1 / 1.2 - 0.6, abs=1e-6)
    # c = 0 drops below the declared delta
    assert any("kernel_lower_bound" in w for w in table.endpoint_warnings)
    assert table.rows[0].lambda0 == pytest.approx(0.72, rel=1e-10)


def test_decay_sweep_without_regime_change(make_two_patch):
    kernel = make_two_patch().with_pieces({(0, 0): KernelPiece("exponential", 0.6, 0.1)})
    base = Scenario(kernel.partition, kernel, GrowthFunction.beverton_holt(2.0, 1.0))
    table = sweep(base, SweepSpec("kernel_decay", 0.0, 0.1, 3, pairs=((0, 0),), resolution=Resolution(2, 4)))
    assert table.crossings == ()
    assert all(r.regime is Regime.PERSISTENCE for r in table.rows)


def test_sweep_workers_give_the_same_table(two_patch_scenario):
    spec = SweepSpec("r0", 1.0, 2.0, 6, resolution=Resolution(1, 2))
    serial = sweep(two_patch_scenario, spec)
    threaded = sweep(two_patch_scenario, spec, workers=3)
    assert serial.to_frame().equals(threaded.to_frame())


def test_phase_table_frames(two_patch_scenario):
    table = sweep(two_patch_scenario, SweepSpec("r0", 1.0, 2.0, 5, resolution=Resolution(1, 2)))
    frame = table.to_frame()
    assert list(frame.columns) == ["parameter", "lambda0", "regime"]
    assert frame["regime"].iloc[0] == "Extinction"
    assert frame["regime"].iloc[-1] == "Persistence"
    crossings = table.crossings_frame()
    assert list(crossings.columns) == ["parameter", "critical_value", "bracket_lo", "bracket_hi", "lambda0"]
    assert crossings["parameter"].tolist() == ["r0"]


def test_sweep_rejects_two_crossings(monkeypatch, two_patch_scenario):
    wobble = iter([0.9, 1.1, 0.9, 1.1])

    def fake_row(self, value):
        lam = next(wobble)
        return PhaseRow(float(value), lam, Regime.PERSISTENCE if lam > 1 else Regime.EXTINCTION)

    monkeypatch.setattr(threshold, "_monotone_expected", lambda base, parameter: False)
    monkeypatch.setattr(threshold._Evaluator, "__call__", fake_row)
    with pytest.raises(NonMonotoneCrossing) as err:
        sweep(two_patch_scenario, SweepSpec("r0", 1.0, 2.0, 4, resolution=Resolution(1, 2)))
    assert len(err.value.brackets) == 3


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(parameter="r0", lo=2.0, hi=1.0, samples=5),
        dict(parameter="r0", lo=1.0, hi=2.0, samples=1),
        dict(parameter="kernel_coefficient", lo=0.0, hi=0.6, samples=5),
    ],
)
def test_sweep_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SweepSpec(**kwargs)
