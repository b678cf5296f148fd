"""Tests for run configuration parsing"""
# Installed
import numpy as np
import pytest
# Local
from consistent_histories import config
from consistent_histories.ansatz import AnsatzKind
from consistent_histories.config import RunConfig
from consistent_histories.exceptions import ConfigError
from consistent_histories.models import SphereMesh
from consistent_histories.report import ThresholdMode
from consistent_histories.vchloop import CostMode, ParameterGrid

IDENTITY_PAIRS = [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]
PLUS_STATE_PAIRS = [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]
SIGMA_Z_HALF_PAIRS = [[[0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]]


def test_load_spin_landscape(spin_landscape_config):
    cfg = RunConfig.load(spin_landscape_config)
    assert cfg.seed == 7
    assert cfg.source == spin_landscape_config
    assert cfg.model.k == 2
    assert cfg.ansatz.kind is AnsatzKind.AZIMUTH_XY
    assert cfg.ansatz.n_params == 2
    assert isinstance(cfg.grid, ParameterGrid)
    assert len(cfg.grid) == 12
    assert cfg.cost_mode is CostMode.FULL
    assert cfg.plan.exact
    assert cfg.plan.seed == 7
    assert cfg.optimizer is None
    assert cfg.readout is None
    assert cfg.workers == 1


def test_overrides(spin_landscape_config):
    cfg = RunConfig.load(spin_landscape_config, seed=3, shots=500, workers=2)
    assert cfg.seed == 3
    assert cfg.plan.shots == 500
    assert cfg.plan.seed == 3
    assert cfg.workers == 2
    assert RunConfig.load(spin_landscape_config, shots="exact").plan.exact


def test_full_document():
    document = {
        "seed": 1,
        "model": {"name": "chiral", "theta_z": 0.01, "theta_x": 5.0, "collisions": 3},
        "ansatz": {"kind": "stationary", "axis": [0, 1, 0]},
        "cost": {"which": "partial"},
        "shots": {"shots": 2000},
        "optimizer": {"restarts": 4, "max_evaluations": 300},
        "grid": {"mesh": "octahedron", "frequency": 2},
        "readout": {"n_readout": 500, "eps_max": 0.2, "threshold": "sqrt-n", "initial_outcome": 0},
        "element": {"a": "000", "b": "011", "part": "imaginary"},
    }
    cfg = RunConfig.from_dict(document)
    assert cfg.model.k == 3
    assert cfg.ansatz.kind is AnsatzKind.STATIONARY
    assert cfg.ansatz.params == pytest.approx([np.pi / 2, np.pi / 2, 0.0])
    assert cfg.cost_mode is CostMode.PARTIAL
    assert cfg.plan.shots == 2000
    assert cfg.optimizer.restarts == 4
    assert cfg.optimizer.max_evaluations == 300
    assert isinstance(cfg.grid, SphereMesh)
    assert len(cfg.grid) == 18
    assert cfg.readout.threshold is ThresholdMode.SQRT_N
    assert cfg.readout.initial_outcome == 0
    assert cfg.element.part == "imaginary"


def test_custom_model():
    document = {
        "model": {"name": "custom", "s_dims": [2], "rho": PLUS_STATE_PAIRS,
                  "segments": [{"hamiltonian": SIGMA_Z_HALF_PAIRS, "dt": 2.0}, {"unitary": IDENTITY_PAIRS}]},
        "ansatz": {"kind": "azimuth-xy", "single_history": True},
    }
    cfg = RunConfig.from_dict(document)
    assert cfg.model.k == 2
    assert np.allclose(cfg.model.segments[0].data, np.diag([np.exp(-1j), np.exp(1j)]))
    assert np.allclose(cfg.model.segments[1].data, np.eye(2))
    assert cfg.ansatz.family().outcome_counts == (1, 1)


def test_parse_matrix():
    assert np.allclose(config.parse_matrix([[[1, 2], [0, 0]], [[0, 0], [3, -4]]], "m"), np.diag([1 + 2j, 3 - 4j]))
    with pytest.raises(ConfigError, match="'m'"):
        config.parse_matrix([[1, 0], [0, 1]], "m")
    with pytest.raises(ConfigError):
        config.parse_matrix("identity", "m")


@pytest.mark.parametrize("value", [0, -5, "many", 2.5j])
def test_parse_shots_errors(value):
    with pytest.raises(ConfigError):
        config.parse_shots(value)


@pytest.mark.parametrize(("value", "expected"), [(None, None), ("exact", None), (10, 10), ("25", 25)])
def test_parse_shots(value, expected):
    assert config.parse_shots(value) == expected


@pytest.mark.parametrize("document",
                         [{},
                          {"model": {"name": "spin_field"}, "extra": 1},
                          {"model": {"name": "nope"}},
                          {"model": {"name": "spin_field", "k": 0}},
                          {"model": {"name": "spin_field", "speed": 1}},
                          {"model": {"name": "custom", "s_dims": [2]}},
                          {"model": {"name": "spin_field"}, "seed": -1},
                          {"model": {"name": "spin_field"}, "ansatz": {"kind": "spiral"}},
                          {"model": {"name": "spin_field"}, "ansatz": {"params": [0.1]}},
                          {"model": {"name": "spin_field"}, "ansatz": {"params": [0.1, 0.2], "axis": [0, 0, 1]}},
                          {"model": {"name": "spin_field"}, "cost": {"which": "cheapest"}},
                          {"model": {"name": "spin_field"}, "optimizer": {"restarts": 0}},
                          {"model": {"name": "spin_field"}, "optimizer": {"tries": 3}},
                          {"model": {"name": "spin_field"}, "grid": {"counts": [3]}},
                          {"model": {"name": "spin_field"}, "grid": {"ranges": [[0, 1]], "counts": [3, 3]}},
                          {"model": {"name": "spin_field"}, "grid": {"mesh": "cube"}},
                          {"model": {"name": "spin_field"}, "ansatz": {"kind": "azimuth-xy"},
                           "grid": {"ranges": [[0, 1], [0, 1], [0, 1]], "counts": [2, 2, 2]}},
                          {"model": {"name": "spin_field"}, "ansatz": {"kind": "azimuth-xy"},
                           "grid": {"mesh": "octahedron"}},
                          {"model": {"name": "spin_field"}, "readout": {"threshold": "gaussian"}},
                          {"model": {"name": "spin_field"}, "readout": {"shots": 10}},
                          {"model": {"name": "spin_field"}, "element": {"c": "01"}},
                          {"model": {"name": "spin_field"}, "workers": 0}])
def test_invalid_documents(document):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(document)


def test_load_errors(write_config, tmp_path):
    with pytest.raises(ConfigError, match="Could not read"):
        RunConfig.load(tmp_path / "missing.toml")
    with pytest.raises(ConfigError, match="not valid TOML"):
        RunConfig.load(write_config("seed = = 3\n"))


def test_require(spin_landscape_config):
    cfg = RunConfig.load(spin_landscape_config)
    cfg.require("landscape", "ansatz", "grid")
    with pytest.raises(ConfigError, match="optimizer"):
        cfg.require("optimize", "ansatz", "optimizer")
