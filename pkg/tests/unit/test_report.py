"""Tests for probability readout and approximate-consistency bounds"""
# Standard
import json
import logging
import math
# Installed
import numpy as np
import pytest
# Local
from consistent_histories import branchstate
from consistent_histories import histories
from consistent_histories import report
from consistent_histories.estimators import ShotPlan
from consistent_histories.histories import HistoryLabel
from consistent_histories.report import RetainedHistory, ThresholdMode
from tests.conftest import SPIN_FIELD_COST, SPIN_FIELD_DIAGONAL


@pytest.fixture
def spin_state(spin_model, azimuth_ansatz):
    """Branched state of the spin-field model at azimuths (0, 0)"""
    return branchstate.build_branched_state(spin_model, azimuth_ansatz.family())


def _retained(*pairs):
    return [RetainedHistory(HistoryLabel.parse(label), p, 0.0) for label, p in pairs]


@pytest.mark.parametrize(("n_readout", "eps_max", "mode", "expected"),
                         [(100, 0.1, ThresholdMode.POISSON, 100.0),
                          (100, 0.05, "poisson", 400.0),
                          (100, 0.3, ThresholdMode.POISSON, 12.0),
                          (10_000, 0.1, ThresholdMode.SQRT_N, 1000.0),
                          (400, 1.0, "sqrt-n", 20.0)])
def test_threshold_count(n_readout, eps_max, mode, expected):
    assert report.threshold_count(n_readout, eps_max, mode) == pytest.approx(expected)


@pytest.mark.parametrize("eps_max", [0.0, -0.1, 1.5])
def test_threshold_count_rejects_bad_precision(eps_max):
    with pytest.raises(ValueError):
        report.threshold_count(100, eps_max)


def test_exact_readout_splits_family(spin_state):
    readout = report.probability_readout(spin_state, 1000, 0.1)
    assert readout.threshold_count == 100.0
    assert [str(h.label) for h in readout.retained] == ["01", "10", "11"]
    for history in readout.retained:
        assert history.probability == pytest.approx(SPIN_FIELD_DIAGONAL[str(history.label)], abs=1e-12)
        assert history.count == pytest.approx(1000 * history.probability)
    assert readout.remainder_probability == pytest.approx(SPIN_FIELD_DIAGONAL["00"], abs=1e-12)
    assert sum(readout.frequencies.values()) == pytest.approx(1.0)


def test_sampled_readout(spin_state):
    plan = ShotPlan(1, seed=4)
    readout = report.probability_readout(spin_state, 5000, 0.1, plan)
    assert sum(h.count for h in readout.retained) <= 5000
    assert all(h.count >= 100 for h in readout.retained)
    assert all(float(h.count).is_integer() for h in readout.retained)
    assert readout == report.probability_readout(spin_state, 5000, 0.1, plan)
    for label, frequency in readout.frequencies.items():
        assert frequency == pytest.approx(SPIN_FIELD_DIAGONAL[str(label)], abs=0.05)


def test_sampled_frequencies_converge(spin_state):
    n_readout = 10_000
    for seed in range(100):
        readout = report.probability_readout(spin_state, n_readout, 0.1, ShotPlan(1, seed=seed))
        assert len(readout.retained) == 4
        for history in readout.retained:
            p = SPIN_FIELD_DIAGONAL[str(history.label)]
            assert abs(history.probability - p) < 5 * math.sqrt(p * (1 - p) / n_readout)


def test_readout_needs_shots(spin_state):
    with pytest.raises(ValueError):
        report.probability_readout(spin_state, 0, 0.1)


def test_epsilon_bounds():
    bounds = report.epsilon_bounds(0.03, _retained(("0", 0.5), ("1", 0.3)), 0.2)
    assert bounds.pairs[(HistoryLabel((0,)), HistoryLabel((1,)))] == pytest.approx(math.sqrt(0.1))
    assert bounds.delta == pytest.approx(math.sqrt(0.2 / 0.3))
    assert bounds.bound == pytest.approx(math.sqrt(0.2 / 0.3))

    tight = report.epsilon_bounds(0.3, _retained(("0", 0.5), ("1", 0.5)), 0.0)
    assert tight.delta == 0.0
    assert tight.bound == pytest.approx(math.sqrt(0.6))


def test_epsilon_bounds_edge_cases():
    with_zero = report.epsilon_bounds(0.01, _retained(("0", 0.0), ("1", 0.6), ("2", 0.4)), 0.0)
    assert math.isnan(with_zero.pairs[(HistoryLabel((0,)), HistoryLabel((1,)))])
    assert with_zero.delta == math.inf
    assert with_zero.bound == math.inf

    empty = report.epsilon_bounds(0.01, [], 1.0)
    assert empty.pairs == {}
    assert empty.delta == math.inf
    assert empty.bound == math.inf

    negative_cost = report.epsilon_bounds(-1e-15, _retained(("0", 0.5), ("1", 0.5)), 0.0)
    assert negative_cost.bound == 0.0


def test_epsilon_bound_covers_true_pairwise_epsilon(spin_model, azimuth_ansatz):
    d = histories.decoherence_matrix(spin_model, azimuth_ansatz.family())
    readout = report.probability_readout(branchstate.build_branched_state(spin_model, azimuth_ansatz.family()),
                                         10_000, 0.1)
    bounds = report.epsilon_bounds(d, readout.retained, readout.remainder_probability)
    from_cost = report.epsilon_bounds(SPIN_FIELD_COST, readout.retained, readout.remainder_probability)
    assert bounds.bound == pytest.approx(from_cost.bound, abs=1e-12)
    true_epsilon = histories.pairwise_epsilon(d)
    pair = (HistoryLabel.parse("00"), HistoryLabel.parse("10"))
    assert true_epsilon[d.index("00"), d.index("10")] == pytest.approx(1.0, abs=1e-10)
    assert bounds.pairs[pair] == pytest.approx(math.sqrt(2), abs=1e-10)
    for (a, b), value in bounds.pairs.items():
        assert value >= true_epsilon[d.index(a), d.index(b)] - 1e-12


@pytest.mark.parametrize(("n_readout", "delta"),
                         [(1000, math.sqrt(SPIN_FIELD_DIAGONAL["00"] / SPIN_FIELD_DIAGONAL["01"])),
                          (2000, 0.0)])
def test_delta_shrinks_with_readout_budget(spin_state, n_readout, delta):
    summary = report.consistency_report(spin_state, n_readout, 0.1)
    assert summary.delta == pytest.approx(delta, abs=1e-6)
    assert not summary.high_entropy
    assert summary.cost_at_solution.c == pytest.approx(SPIN_FIELD_COST, abs=1e-12)


def test_high_entropy_family(spin_state, caplog):
    with caplog.at_level(logging.WARNING, logger="consistent_histories.report"):
        summary = report.consistency_report(spin_state, 100, 0.1)
    assert summary.high_entropy
    assert summary.retained == []
    assert summary.remainder_probability == pytest.approx(1.0)
    assert summary.delta == math.inf
    assert summary.epsilon_bound == math.inf
    assert "too high-entropy" in caplog.text


@pytest.mark.parametrize(("initial_outcome", "expected"),
                         [(None, 0.2 + 0.05),
                          (0, 0.2 + 0.05 + 0.25),
                          (1, 0.5 + 0.2 + 0.05)])
def test_change_probability(initial_outcome, expected):
    frequencies = {HistoryLabel.parse("00"): 0.5, HistoryLabel.parse("01"): 0.2,
                   HistoryLabel.parse("10"): 0.05, HistoryLabel.parse("11"): 0.25}
    assert report.change_probability(frequencies, initial_outcome) == pytest.approx(expected)


def test_report_to_dict(spin_state):
    summary = report.consistency_report(spin_state, 1000, 0.1, initial_outcome=0)
    document = summary.to_dict()
    assert set(document) == {"retained", "remainder_probability", "n_readout", "threshold_count", "epsilon_pairs",
                             "delta", "epsilon_bound", "change_probability", "high_entropy", "cost"}
    assert [entry["label"] for entry in document["retained"]] == ["01", "10", "11"]
    assert len(document["epsilon_pairs"]) == 3
    assert document["change_probability"] == pytest.approx(1 - SPIN_FIELD_DIAGONAL["00"], abs=1e-12)
    json.dumps(document)


def test_partial_trace_handoff(spin_model, azimuth_ansatz):
    handoff = report.partial_trace_handoff(spin_model, azimuth_ansatz.family(), 1000, 0.1)
    direct = report.consistency_report(branchstate.build_branched_state(spin_model, azimuth_ansatz.family()),
                                       1000, 0.1)
    assert handoff == direct
    assert np.isfinite(handoff.epsilon_bound)
