"""Projector parameterizations: map a flat parameter vector to the basis unitaries of a family"""
# Standard
from dataclasses import dataclass
from enum import Enum
import logging
from typing import List, Optional, Sequence, Tuple
# Installed
import numpy as np
# Local
from consistent_histories import comparisons
from consistent_histories import qmath
from consistent_histories.histories import FamilySpec, TimeStep

logger = logging.getLogger(__name__)

CNOT = np.array([[1, 0, 0, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1],
                 [0, 0, 1, 0]], dtype=complex)


class AnsatzKind(Enum):
    """Parameterization of the per-time basis unitaries"""
    AZIMUTH_XY = "azimuth-xy"
    SINGLE_QUBIT_GENERAL = "single-qubit-general"
    STATIONARY = "stationary"
    LAYERED_MULTI_QUBIT = "layered-multi-qubit"


def azimuth_unitary(phi: float) -> np.ndarray:
    """Basis change to the pair of Bloch vectors (cos phi, sin phi, 0) and its negation. Column 0 is the + axis."""
    phase = np.exp(1j * phi)
    return np.array([[1, 1], [phase, -phase]], dtype=complex) / np.sqrt(2)


def u3_unitary(theta: float, phi: float, lam: float) -> np.ndarray:
    """General single-qubit unitary whose first column points along the Bloch axis (theta, phi)"""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    """Rotation of a qubit about y by ``angle``"""
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(angle: float) -> np.ndarray:
    """Rotation of a qubit about z by ``angle``"""
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def _brickwork_pairs(n_qubits: int, layer: int) -> List[Tuple[int, int]]:
    start = layer % 2 if n_qubits > 2 else 0
    return [(q, q + 1) for q in range(start, n_qubits - 1, 2)]


def _two_qubit_block(n_qubits: int, first: int, angles: Sequence[float]) -> np.ndarray:
    """CNOT (first -> first + 1) after Ry Rz rotations on both qubits, extended by identities"""
    local = np.kron(ry(angles[0]) @ rz(angles[1]), ry(angles[2]) @ rz(angles[3]))
    block = CNOT @ local
    return np.kron(np.kron(np.eye(2 ** first), block), np.eye(2 ** (n_qubits - first - 2)))


@dataclass(frozen=True, eq=False)
class AnsatzSpec(comparisons.AttrComparable):
    """A parameterized family of projector bases.

    Parameters
    ----------
    kind : AnsatzKind
        Parameterization
    k : int
        Number of projection times
    params : np.ndarray, Optional
        Flat parameter vector in radians. Defaults to zeros.
    s_dims : Sequence[int]
        Subsystem dims of S. Single-qubit kinds need (2,), the layered kind needs two or more qubits.
    base : AnsatzKind
        Per-block kind of a stationary ansatz (azimuth-xy or single-qubit-general)
    layers : int
        Layer count of the layered multi-qubit kind
    partitions : Sequence, Optional
        Rank partition per time, or a single partition used at every time. Defaults to one projector per
        basis vector.
    """
    kind: AnsatzKind
    k: int
    params: Optional[np.ndarray] = None
    s_dims: Tuple[int, ...] = (2,)
    base: AnsatzKind = AnsatzKind.SINGLE_QUBIT_GENERAL
    layers: int = 1
    partitions: Optional[Tuple] = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', AnsatzKind(self.kind))
        object.__setattr__(self, 'base', AnsatzKind(self.base))
        object.__setattr__(self, 's_dims', tuple(int(d) for d in self.s_dims))
        if self.k < 1:
            raise ValueError(f"An ansatz needs at least one time, got k={self.k}.")
        if self.kind in (AnsatzKind.AZIMUTH_XY, AnsatzKind.SINGLE_QUBIT_GENERAL, AnsatzKind.STATIONARY):
            if self.s_dims != (2,):
                raise ValueError(f"The {self.kind.value} ansatz acts on a single qubit, got S dims {self.s_dims}.")
        if self.kind is AnsatzKind.STATIONARY and self.base not in (AnsatzKind.AZIMUTH_XY,
                                                                   AnsatzKind.SINGLE_QUBIT_GENERAL):
            raise ValueError(f"A stationary ansatz repeats a single-qubit block, got base {self.base.value}.")
        if self.kind is AnsatzKind.LAYERED_MULTI_QUBIT:
            if len(self.s_dims) < 2 or any(d != 2 for d in self.s_dims):
                raise ValueError(f"The layered ansatz needs two or more qubits, got S dims {self.s_dims}.")
            if self.layers < 1:
                raise ValueError(f"The layered ansatz needs at least one layer, got {self.layers}.")

        if self.params is None:
            params = np.zeros(self.n_params)
        else:
            params = np.array(self.params, dtype=float).ravel()
        if params.size != self.n_params:
            raise ValueError(f"The {self.kind.value} ansatz with k={self.k} takes {self.n_params} parameters, "
                             f"got {params.size}.")
        params.flags.writeable = False
        object.__setattr__(self, 'params', params)
        object.__setattr__(self, 'partitions', self._normalize_partitions(self.partitions))

    def _normalize_partitions(self, partitions) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
        side = int(np.prod(self.s_dims))
        if partitions is None:
            return (tuple((i,) for i in range(side)),) * self.k
        partitions = tuple(partitions)
        if partitions and all(isinstance(i, (int, np.integer)) for i in partitions[0]):
            partitions = (partitions,) * self.k
        if len(partitions) != self.k:
            raise ValueError(f"Got {len(partitions)} rank partitions for {self.k} times.")
        return tuple(tuple(tuple(int(i) for i in group) for group in partition) for partition in partitions)

    @property
    def _block_size(self) -> int:
        if self.kind is AnsatzKind.AZIMUTH_XY:
            return 1
        if self.kind is AnsatzKind.SINGLE_QUBIT_GENERAL:
            return 3
        if self.kind is AnsatzKind.STATIONARY:
            return 1 if self.base is AnsatzKind.AZIMUTH_XY else 3
        n_qubits = len(self.s_dims)
        return 4 * sum(len(_brickwork_pairs(n_qubits, layer)) for layer in range(self.layers))

    @property
    def n_params(self) -> int:
        """Length of the parameter vector"""
        if self.kind is AnsatzKind.STATIONARY:
            return self._block_size
        return self._block_size * self.k

    @property
    def period(self) -> float:
        """Period of the projector family in every parameter"""
        single = self.base if self.kind is AnsatzKind.STATIONARY else self.kind
        return np.pi if single is AnsatzKind.AZIMUTH_XY else 2 * np.pi

    def with_params(self, params: Sequence[float]) -> 'AnsatzSpec':
        """Same ansatz at another parameter point"""
        return AnsatzSpec(self.kind, self.k, params, self.s_dims, self.base, self.layers, self.partitions)

    def _block_unitary(self, kind: AnsatzKind, block: np.ndarray) -> np.ndarray:
        if kind is AnsatzKind.AZIMUTH_XY:
            return azimuth_unitary(block[0])
        if kind is AnsatzKind.SINGLE_QUBIT_GENERAL:
            return u3_unitary(*block)
        n_qubits = len(self.s_dims)
        unitary = np.eye(2 ** n_qubits, dtype=complex)
        offset = 0
        for layer in range(self.layers):
            for first, _ in _brickwork_pairs(n_qubits, layer):
                unitary = _two_qubit_block(n_qubits, first, block[offset:offset + 4]) @ unitary
                offset += 4
        return unitary

    def basis_unitaries(self) -> List[qmath.Operator]:
        """One basis unitary per time"""
        if self.kind is AnsatzKind.STATIONARY:
            shared = qmath.Operator(self.s_dims, self._block_unitary(self.base, self.params))
            return [shared] * self.k
        size = self._block_size
        return [qmath.Operator(self.s_dims, self._block_unitary(self.kind, self.params[j * size:(j + 1) * size]))
                for j in range(self.k)]

    def family(self) -> FamilySpec:
        """History family at the current parameters"""
        steps = [TimeStep(unitary, partition) for unitary, partition in zip(self.basis_unitaries(), self.partitions)]
        return FamilySpec(tuple(steps), self.s_dims)

    def random_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from [0, period) in every parameter"""
        return rng.uniform(0.0, self.period, self.n_params)


def single_history_partitions(s_dims: Sequence[int], k: int) -> Tuple[Tuple[Tuple[int, ...], ...], ...]:
    """Partitions with a single rank-dS projector per time, so that the family has exactly one history"""
    side = int(np.prod(s_dims))
    return ((tuple(range(side)),),) * k
