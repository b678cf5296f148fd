"""Tests for costs, landscape scans and the optimizer"""
# Standard
import logging
import math
# Installed
import numpy as np
import pytest
# Local
from consistent_histories import branchstate
from consistent_histories import histories
from consistent_histories import vchloop
from consistent_histories.ansatz import AnsatzKind, AnsatzSpec, single_history_partitions
from consistent_histories.estimators import ShotPlan
from consistent_histories.models import random_model
from consistent_histories.vchloop import CostMode, CostValue, OptimizerConfig, ParameterGrid
from tests.conftest import SPIN_FIELD_COST, SPIN_FIELD_DIAGONAL

SAMPLE_COST = CostValue(c=0.1, c_stderr=0.03, p_diag=0.5, p_diag_stderr=0.0, c_pt=0.2, c_pt_stderr=0.04,
                         c_tilde=0.2, c_tilde_stderr=0.06, c_pt_tilde=0.4, c_pt_tilde_stderr=0.08)


@pytest.mark.parametrize(("which", "expected"),
                         [(CostMode.FULL, (0.1, 0.03)),
                          (CostMode.PARTIAL, (0.2, 0.04)),
                          (CostMode.TILDE, (0.2, 0.06)),
                          (CostMode.TILDE_PARTIAL, (0.4, 0.08)),
                          ("both", (0.3, 0.05))])
def test_cost_objective(which, expected):
    assert SAMPLE_COST.objective(which) == pytest.approx(expected)


def test_objective_needs_partial_cost():
    value = CostValue(c=0.1, c_stderr=0.0, p_diag=0.5, p_diag_stderr=0.0)
    assert value.objective(CostMode.FULL) == (0.1, 0.0)
    for which in (CostMode.PARTIAL, CostMode.BOTH, CostMode.TILDE_PARTIAL):
        assert which.needs_partial
        with pytest.raises(ValueError):
            value.objective(which)
    assert not CostMode.TILDE.needs_partial
    assert set(value.to_dict()) >= {"c", "c_stderr", "p_diag", "c_pt"}


def test_spin_field_cost_at_origin(spin_model, azimuth_ansatz):
    value = vchloop.cost(spin_model, azimuth_ansatz, CostMode.BOTH)
    diagonal_purity = sum(p ** 2 for p in SPIN_FIELD_DIAGONAL.values())
    assert value.c == pytest.approx(SPIN_FIELD_COST, abs=1e-12)
    assert value.p_diag == pytest.approx(diagonal_purity, abs=1e-12)
    assert value.c_tilde == pytest.approx(SPIN_FIELD_COST / diagonal_purity, abs=1e-12)
    # pure initial state and no environment: every history pair contributes p_a p_b
    assert value.c_pt == pytest.approx(1 - diagonal_purity, abs=1e-12)
    assert value.c_stderr == 0.0


@pytest.mark.parametrize("params",
                         [(2.0, 0.0),
                          (2.0, 1.234),
                          (2.0, 5.0),
                          (2.0 - np.pi, 2.5),
                          (0.3, 2.3),
                          (1.0, 3.0 - np.pi)])
def test_spin_field_valleys_have_zero_cost(spin_model, azimuth_ansatz, params):
    value = vchloop.cost(spin_model, azimuth_ansatz.with_params(params))
    assert value.c == pytest.approx(0.0, abs=1e-12)
    assert value.c_pt is None


def test_single_history_cost_is_zero(spin_model):
    spec = AnsatzSpec(AnsatzKind.AZIMUTH_XY, 2, [0.4, 0.9], partitions=single_history_partitions((2,), 2))
    value = vchloop.cost(spin_model, spec, CostMode.BOTH)
    assert value.c == pytest.approx(0.0, abs=1e-12)
    assert value.c_pt == pytest.approx(0.0, abs=1e-12)
    assert value.p_diag == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_costs_are_off_diagonal_weights(seed):
    model, family = random_model((3, 2), 2, seed=seed)
    value = vchloop.cost_from_state(branchstate.build_branched_state(model, family), CostMode.PARTIAL, ShotPlan())
    full = histories.decoherence_matrix(model, family, histories.TraceMode.FULL)
    partial = histories.decoherence_matrix(model, family, histories.TraceMode.PARTIAL)
    assert value.c == pytest.approx(full.off_diagonal_weight(), abs=1e-12)
    assert value.c_pt == pytest.approx(partial.off_diagonal_weight(), abs=1e-12)
    assert value.c <= model.s_dims[0] * value.c_pt + 1e-12


def test_sampled_cost_is_reproducible(spin_model, azimuth_ansatz):
    plan = ShotPlan(5000, seed=3)
    first = vchloop.cost(spin_model, azimuth_ansatz, CostMode.BOTH, plan)
    second = vchloop.cost(spin_model, azimuth_ansatz, CostMode.BOTH, plan)
    assert first == second
    assert first.c_stderr > 0
    assert abs(first.c - SPIN_FIELD_COST) <= 5 * first.c_stderr


def test_parameter_grid():
    grid = ParameterGrid.from_ranges([(0, 1), (0, 10)], [2, 3])
    assert len(grid) == 6
    points = grid.points()
    assert points.shape == (6, 2) == (len(grid), grid.n_params)
    assert points[:3].tolist() == [[0.0, 0.0], [0.0, 10 / 3], [0.0, 20 / 3]]
    assert points[3].tolist() == [0.5, 0.0]
    with_endpoint = ParameterGrid.from_ranges([(0, 1)], [3], endpoint=True)
    assert with_endpoint.points().ravel().tolist() == [0.0, 0.5, 1.0]
    with pytest.raises(ValueError):
        ParameterGrid(([],))
    with pytest.raises(ValueError):
        ParameterGrid.from_ranges([(0, 1)], [2, 2])


def test_landscape_scan(spin_model, azimuth_ansatz):
    grid = ParameterGrid(([0.0, 2.0], [0.0, 1.0]))
    rows = vchloop.landscape_scan(spin_model, azimuth_ansatz, grid)
    assert len(rows) == 4
    assert np.allclose([row.params for row in rows], grid.points())
    assert rows[0].cost.c == pytest.approx(SPIN_FIELD_COST, abs=1e-12)
    assert rows[2].cost.c == pytest.approx(0.0, abs=1e-12)
    assert rows[3].cost.c == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        vchloop.landscape_scan(spin_model, azimuth_ansatz, ParameterGrid(([0.0],)))


def test_landscape_scan_is_independent_of_workers(spin_model, azimuth_ansatz):
    grid = ParameterGrid.from_ranges([(0, np.pi), (0, np.pi)], [3, 3])
    plan = ShotPlan(2000, seed=11)
    serial = vchloop.landscape_scan(spin_model, azimuth_ansatz, grid, CostMode.FULL, plan, workers=1)
    parallel = vchloop.landscape_scan(spin_model, azimuth_ansatz, grid, CostMode.FULL, plan, workers=2)
    assert [row.cost for row in serial] == [row.cost for row in parallel]
    assert len({row.cost.c for row in serial}) > 1


def test_nelder_mead():
    opt = OptimizerConfig(max_evaluations=1000, xatol=1e-10, fatol=1e-14)
    result = vchloop.nelder_mead(lambda x: float(np.sum((x - [1.0, -2.0]) ** 2)), [0.0, 0.0], opt)
    assert result.success
    assert result.x == pytest.approx([1.0, -2.0], abs=1e-6)

    flat = vchloop.nelder_mead(lambda x: 0.0, [0.3, 0.7], opt)
    assert flat.x.tolist() == [0.3, 0.7]


@pytest.mark.parametrize(("a", "b", "period", "expected"),
                         [((0.1,), (0.2,), np.pi, 0.1),
                          ((0.1,), (np.pi - 0.1,), np.pi, 0.2),
                          ((0.0, 1.0), (2 * np.pi, 1.5), 2 * np.pi, 0.5),
                          ((), (), np.pi, 0.0)])
def test_periodic_distance(a, b, period, expected):
    assert vchloop.periodic_distance(np.array(a), np.array(b), period) == pytest.approx(expected)


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(restarts=0)
    with pytest.raises(ValueError):
        OptimizerConfig(max_evaluations=0)
    with pytest.raises(ValueError):
        OptimizerConfig(simplex_scale=-1)


def _valley_distance(params):
    phi_1, phi_2 = params
    first = vchloop.periodic_distance(np.array([phi_1 - 2.0]), np.zeros(1), np.pi)
    second = vchloop.periodic_distance(np.array([phi_2 - phi_1 - 2.0]), np.zeros(1), np.pi)
    return min(first, second)


def test_optimize_finds_spin_field_valleys(spin_model, azimuth_ansatz):
    result = vchloop.optimize(spin_model, azimuth_ansatz, CostMode.FULL, ShotPlan(seed=5), OptimizerConfig(restarts=6))
    assert len(result.restarts) == 6
    assert result.evaluations == sum(record.evaluations for record in result.restarts)
    assert result.minima
    for minimum in result.minima:
        assert minimum.cost.c <= vchloop.EXACT_ACCEPTANCE
        assert _valley_distance(minimum.params) < 0.05
        assert np.all((minimum.params >= 0) & (minimum.params <= np.pi))
    for first in result.minima:
        for second in result.minima:
            if first is not second:
                assert vchloop.periodic_distance(first.params, second.params, np.pi) > 0.1
    assert [m.cost.c for m in result.minima] == sorted(m.cost.c for m in result.minima)


def test_optimize_single_history_family(spin_model):
    spec = AnsatzSpec(AnsatzKind.AZIMUTH_XY, 2, partitions=single_history_partitions((2,), 2))
    result = vchloop.optimize(spin_model, spec, CostMode.FULL, ShotPlan(), OptimizerConfig(restarts=3))
    assert len(result.minima) == 1
    assert result.minima[0].cost.c == pytest.approx(0.0, abs=1e-12)
    assert all(record.accepted for record in result.restarts)


def test_optimize_is_reproducible(spin_model, azimuth_ansatz):
    plan = ShotPlan(2000, seed=1)
    opt = OptimizerConfig(restarts=2, max_evaluations=40)
    first = vchloop.optimize(spin_model, azimuth_ansatz, CostMode.FULL, plan, opt)
    second = vchloop.optimize(spin_model, azimuth_ansatz, CostMode.FULL, plan, opt, workers=2)
    assert [r.value for r in first.restarts] == [r.value for r in second.restarts]
    assert [r.params.tolist() for r in first.restarts] == [r.params.tolist() for r in second.restarts]


def test_optimize_reports_exhausted_budgets(spin_model, azimuth_ansatz, caplog):
    opt = OptimizerConfig(restarts=2, max_evaluations=5)
    with caplog.at_level(logging.WARNING, logger="consistent_histories.vchloop"):
        result = vchloop.optimize(spin_model, azimuth_ansatz.with_params([0.5, 0.5]), CostMode.FULL, ShotPlan(),
                                  opt)
    assert all(record.budget_exhausted for record in result.restarts)
    assert not any(record.converged for record in result.restarts)
    assert "exhausted its budget" in caplog.text
    assert math.isfinite(result.restarts[0].value)


@pytest.mark.parametrize("seed", range(3))
def test_azimuth_cost_is_pi_periodic(spin_model, azimuth_ansatz, seed):
    params = azimuth_ansatz.random_params(np.random.default_rng(seed))
    value = vchloop.cost(spin_model, azimuth_ansatz.with_params(params)).c
    for shift in ([np.pi, 0.0], [0.0, np.pi], [-np.pi, 2 * np.pi]):
        shifted = vchloop.cost(spin_model, azimuth_ansatz.with_params(params + np.array(shift))).c
        assert shifted == pytest.approx(value, abs=1e-12)


def test_sampled_cost_can_be_negative_at_zero(spin_model, azimuth_ansatz):
    valley = azimuth_ansatz.with_params([2.0, 0.7])
    samples = [vchloop.cost(spin_model, valley, plan=ShotPlan(8192, seed=seed)) for seed in range(20)]
    assert any(sample.c < 0 for sample in samples)
    assert all(abs(sample.c) <= 5 * sample.c_stderr for sample in samples)
