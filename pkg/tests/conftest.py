"""Test fixtures"""
# Standard
import textwrap
# Installed
import numpy as np
import pytest
# Local
from consistent_histories import models
from consistent_histories.ansatz import AnsatzKind, AnsatzSpec

# Spin-field analytic values at azimuths (0, 0) with gamma B dt = 2
COS2 = np.cos(1) ** 2
SIN2 = np.sin(1) ** 2
SPIN_FIELD_DIAGONAL = {"00": COS2 ** 2, "01": COS2 * SIN2, "10": SIN2 ** 2, "11": COS2 * SIN2}
SPIN_FIELD_COST = np.sin(2) ** 4 / 4

QUANTUM_REGIME = models.ChiralConfig(theta_z=5.0, theta_x=0.01)
CLASSICAL_REGIME = models.ChiralConfig(theta_z=0.01, theta_x=5.0)

AXES = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}


@pytest.fixture
def spin_model():
    """Default spin-field model, two projection times"""
    return models.spin_field_model()


@pytest.fixture
def azimuth_ansatz():
    """Azimuth ansatz for two times at (0, 0)"""
    return AnsatzSpec(AnsatzKind.AZIMUTH_XY, 2)


@pytest.fixture
def quantum_chiral_model():
    """Chiral model dominated by tunneling"""
    return models.chiral_model(QUANTUM_REGIME)


@pytest.fixture
def classical_chiral_model():
    """Chiral model dominated by collisions"""
    return models.chiral_model(CLASSICAL_REGIME)


@pytest.fixture
def stationary_axis_ansatz():
    """Factory for five-time stationary single-qubit ansatzes pointing along a named axis or a vector"""
    def _ansatz(axis, k: int = 5) -> AnsatzSpec:
        axis = AXES.get(axis, axis)
        return AnsatzSpec(AnsatzKind.STATIONARY, k, models.axis_params(axis))
    return _ansatz


@pytest.fixture
def write_config(tmp_path):
    """Factory that writes a TOML run file into the test's temporary directory"""
    def _write(text: str, name: str = "run.toml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def spin_landscape_config(write_config):
    """Run file for a coarse exact spin-field landscape"""
    return write_config("""
        seed = 7

        [model]
        name = "spin_field"

        [ansatz]
        kind = "azimuth-xy"

        [grid]
        ranges = [[0.0, 3.141592653589793], [0.0, 3.141592653589793]]
        counts = [4, 3]
    """)
