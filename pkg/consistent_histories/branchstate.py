"""Branched states built by the state-preparation circuit semantics

The sweep starts from rho on S (x) E with every ancilla in |0>. At each time it evolves S (x) E by the
segment unitary, rotates S into the (branch-controlled) projector basis, records the projector group of the
rotated basis state in that time's ancilla, and rotates back. The environment is traced out once at the end.

Rather than carrying the full S (x) E (x) A density matrix, the sweep carries the linear map L from S (x) E to
S (x) E (x) A that the circuit implements, so that sigma = L rho L^dagger.
"""
# Standard
from dataclasses import dataclass
import itertools
import logging
from typing import List, Sequence, Tuple, Union
# Installed
import numpy as np
# Local
from consistent_histories import comparisons
from consistent_histories import qmath
from consistent_histories.exceptions import DimensionMismatchError, InvalidStateError
from consistent_histories.histories import (
    DecoherenceMatrix, FamilySpec, HistoryLabel, ModelSpec, TraceMode)

logger = logging.getLogger(__name__)

# Tolerance on positivity and trace of the branched states
BRANCHED_STATE_ATOL = 1e-10


@dataclass(frozen=True, eq=False)
class BranchedState(comparisons.AttrComparable):
    """The branched states sigma^SA and sigma^A of a (model, family) pair.

    Parameters
    ----------
    sigma_sa : qmath.Operator
        State on S (x) A with subsystem dims ``s_dims + ancilla_dims``
    s_dims : Sequence[int]
        Subsystem dims of S
    ancilla_dims : Sequence[int]
        One ancilla per time, of dimension m_j
    """
    sigma_sa: qmath.Operator
    s_dims: Tuple[int, ...]
    ancilla_dims: Tuple[int, ...]

    def __post_init__(self):
        s_dims = tuple(int(d) for d in self.s_dims)
        ancilla_dims = tuple(int(m) for m in self.ancilla_dims)
        object.__setattr__(self, 's_dims', s_dims)
        object.__setattr__(self, 'ancilla_dims', ancilla_dims)
        if self.sigma_sa.dims != s_dims + ancilla_dims:
            raise DimensionMismatchError(f"Branched state dims {self.sigma_sa.dims} do not match S dims {s_dims} "
                                         f"plus ancilla dims {ancilla_dims}.")
        if not self.sigma_sa.is_psd(BRANCHED_STATE_ATOL) or not self.sigma_sa.has_unit_trace(BRANCHED_STATE_ATOL):
            raise InvalidStateError(f"Branched state is not a density matrix within {BRANCHED_STATE_ATOL}.")
        sigma_a = qmath.partial_trace(self.sigma_sa, self.system)
        object.__setattr__(self, '_sigma_a', sigma_a)

    @property
    def sigma_a(self) -> qmath.Operator:
        """Ancilla state sigma^A = Tr_S(sigma^SA)"""
        return self._sigma_a

    @property
    def system(self) -> qmath.SubsystemSelector:
        """Selector for the S subsystems of sigma_sa"""
        return qmath.SubsystemSelector.span(0, len(self.s_dims))

    @property
    def ancillas(self) -> qmath.SubsystemSelector:
        """Selector for the ancilla subsystems of sigma_sa"""
        return qmath.SubsystemSelector.span(len(self.s_dims), len(self.sigma_sa.dims))

    @property
    def labels(self) -> List[HistoryLabel]:
        """History labels in ancilla basis order"""
        return [HistoryLabel(outcomes) for outcomes in itertools.product(*(range(m) for m in self.ancilla_dims))]

    def label_index(self, label: HistoryLabel) -> int:
        """Position of a label in the ancilla basis"""
        label = HistoryLabel(label)
        label.validate(self.ancilla_dims)
        return int(np.ravel_multi_index(tuple(label), self.ancilla_dims))


def _apply_segment(linear_map: np.ndarray, unitary: qmath.Operator, s_dim: int, e_dim: int) -> np.ndarray:
    """Left-multiply the S (x) E factor of the map by a segment unitary"""
    u = unitary.data.reshape(s_dim, e_dim, s_dim, e_dim)
    return np.einsum('abcd,cdpz->abpz', u, linear_map)


def _record(linear_map: np.ndarray, bases: Sequence[np.ndarray], partition: Sequence[Sequence[int]]) -> np.ndarray:
    """Append one ancilla and write into it the projector group of each prefix's rotated S basis state"""
    s_dim, e_dim, n_prefixes, width = linear_map.shape
    recorded = np.zeros((s_dim, e_dim, n_prefixes, len(partition), width), dtype=complex)
    for p, basis in enumerate(bases):
        rotated = np.einsum('xs,sez->xez', basis.conj().T, linear_map[:, :, p, :])
        for a, group in enumerate(partition):
            kept = np.zeros_like(rotated)
            kept[list(group)] = rotated[list(group)]
            recorded[:, :, p, a, :] = np.einsum('sx,xez->sez', basis, kept)
    return recorded.reshape(s_dim, e_dim, n_prefixes * len(partition), width)


def build_branched_state(model: ModelSpec, family: FamilySpec) -> BranchedState:
    """Prepare sigma^SA for a model and family and trace out the environment.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    family : FamilySpec
        History family

    Returns
    -------
    : BranchedState
    """
    if model.s_dims != family.s_dims or model.k != family.k:
        raise DimensionMismatchError(f"Model (S dims {model.s_dims}, {model.k} times) and family "
                                     f"(S dims {family.s_dims}, {family.k} times) do not fit together.")
    s_dim = model.s_dim
    e_dim = int(np.prod(model.e_dims)) if model.e_dims else 1
    width = s_dim * e_dim
    linear_map = np.eye(width, dtype=complex).reshape(s_dim, e_dim, 1, width)
    ancilla_dims = []
    for j, (segment, step) in enumerate(zip(model.segments, family.steps)):
        linear_map = _apply_segment(linear_map, segment, s_dim, e_dim)
        prefixes = itertools.product(*(range(m) for m in ancilla_dims))
        bases = [family.effective_basis(j, prefix) for prefix in prefixes]
        linear_map = _record(linear_map, bases, step.rank_partition)
        ancilla_dims.append(step.n_outcomes)
    logger.debug(f"Swept {model.k} times into ancilla dims {tuple(ancilla_dims)}.")

    mapped = np.einsum('sepz,zw->sepw', linear_map, model.rho.data)
    sigma = np.einsum('sepw,teqw->sptq', mapped, linear_map.conj())
    side = s_dim * linear_map.shape[2]
    sigma_sa = qmath.Operator(model.s_dims + tuple(ancilla_dims), sigma.reshape(side, side))
    return BranchedState(sigma_sa, model.s_dims, tuple(ancilla_dims))


def element(state: BranchedState, a: HistoryLabel, b: HistoryLabel,
            mode: TraceMode = TraceMode.FULL) -> Union[complex, qmath.Operator]:
    """<a|sigma^A|b> in full mode, or the S-operator block (1 (x) <a|) sigma^SA (1 (x) |b>) in partial mode"""
    i, j = state.label_index(a), state.label_index(b)
    if TraceMode(mode) is TraceMode.FULL:
        return complex(state.sigma_a.data[i, j])
    s_dim = state.sigma_sa.side // state.sigma_a.side
    blocks = state.sigma_sa.data.reshape(s_dim, state.sigma_a.side, s_dim, state.sigma_a.side)
    return qmath.Operator(state.s_dims, blocks[:, i, :, j])


def to_decoherence_matrix(state: BranchedState, mode: TraceMode = TraceMode.FULL) -> DecoherenceMatrix:
    """Read the whole decoherence functional out of a branched state"""
    mode = TraceMode(mode)
    n = state.sigma_a.side
    if mode is TraceMode.FULL:
        entries = state.sigma_a.data
    else:
        s_dim = state.sigma_sa.side // n
        entries = state.sigma_sa.data.reshape(s_dim, n, s_dim, n).transpose(1, 3, 0, 2)
    return DecoherenceMatrix(mode, state.labels, entries, state.s_dims)
