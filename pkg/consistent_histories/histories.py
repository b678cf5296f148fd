"""Models, history families, class operators and the decoherence functional

This module is the brute-force route to the decoherence functional: every class operator is built by a forward
sweep over the model's segments and the family's projectors, and every functional entry is an explicit trace.
"""
# Standard
from dataclasses import dataclass, field
from enum import Enum
import itertools
import logging
from typing import Dict, List, Mapping, NamedTuple, Sequence, Tuple, Union
# Installed
import numpy as np
# Local
from consistent_histories import comparisons
from consistent_histories import qmath
from consistent_histories.exceptions import (
    DimensionMismatchError, FamilyDefinitionError, HistoryLabelError, InvalidStateError)

logger = logging.getLogger(__name__)

# Tolerance for state validity checks on user-supplied initial states
STATE_ATOL = 1e-12
# Unitarity tolerance for basis and branch unitaries
UNITARY_ATOL = 1e-10
# Diagonal entries below this are treated as zero-probability histories
ZERO_PROBABILITY = 1e-14


class TraceMode(Enum):
    """Which decoherence functional is meant: scalar full trace or S-operator partial trace"""
    FULL = "full"
    PARTIAL = "partial"


class ConsistencyFlavor(Enum):
    """Which consistency condition check_consistency evaluates"""
    REAL_PART = "real-part"
    STRONG = "strong"
    PARTIAL = "partial"


def _is_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0) <= atol)


class HistoryLabel(tuple):
    """Outcome sequence (alpha_1, ..., alpha_k) of one history.

    Labels render as digit strings (``"01"``) when every outcome is a single digit and as comma separated
    lists (``"0,12"``) otherwise. ``parse`` accepts both forms.
    """

    def __new__(cls, outcomes: Sequence[int] = ()):
        return super().__new__(cls, (int(a) for a in outcomes))

    def __str__(self):
        if all(a < 10 for a in self):
            return ''.join(str(a) for a in self)
        return ','.join(str(a) for a in self)

    def __repr__(self):
        return f"{self.__class__.__name__}('{self}')"

    @classmethod
    def parse(cls, text: str) -> 'HistoryLabel':
        """Parse a label from ``"01"`` or ``"0,1"`` notation.

        Parameters
        ----------
        text : str
            Label text

        Returns
        -------
        : HistoryLabel
        """
        text = text.strip()
        pieces = text.split(',') if ',' in text else list(text)
        try:
            outcomes = [int(piece) for piece in pieces]
        except ValueError as e:
            raise HistoryLabelError(f"Could not parse history label '{text}'.") from e
        if not outcomes or any(a < 0 for a in outcomes):
            raise HistoryLabelError(f"History label '{text}' must be a nonempty list of nonnegative outcomes.")
        return cls(outcomes)

    def validate(self, outcome_counts: Sequence[int]) -> None:
        """Raise HistoryLabelError unless this label has one in-range outcome per time"""
        if len(self) != len(outcome_counts):
            raise HistoryLabelError(f"Label {self} has {len(self)} outcomes but the family has "
                                    f"{len(outcome_counts)} times.")
        for j, (a, m) in enumerate(zip(self, outcome_counts)):
            if not 0 <= a < m:
                raise HistoryLabelError(f"Outcome {a} of label {self} at time {j + 1} is out of range for "
                                        f"{m} projectors.")


@dataclass(frozen=True, eq=False)
class ModelSpec(comparisons.AttrComparable):
    """Initial state and inter-time evolution of a system S with an optional environment E.

    Parameters
    ----------
    rho : qmath.Operator
        Initial density matrix on S (x) E
    segments : Sequence[Union[qmath.Operator, Tuple[qmath.Operator, float]]]
        One entry per projection time. Entry j evolves the state from the previous event up to time j. Either a
        unitary on S (x) E or a (Hamiltonian, dt) pair, which is exponentiated on construction.
    s_dims : Sequence[int]
        Subsystem dimensions of S
    e_dims : Sequence[int]
        Subsystem dimensions of E. Empty for a model without environment.
    """
    rho: qmath.Operator
    segments: Tuple[qmath.Operator, ...]
    s_dims: Tuple[int, ...]
    e_dims: Tuple[int, ...] = ()

    def __post_init__(self):
        s_dims = tuple(int(d) for d in self.s_dims)
        e_dims = tuple(int(d) for d in self.e_dims)
        object.__setattr__(self, 's_dims', s_dims)
        object.__setattr__(self, 'e_dims', e_dims)
        if not s_dims:
            raise DimensionMismatchError("A model needs at least one system subsystem.")
        if self.rho.dims != self.dims:
            raise DimensionMismatchError(f"Initial state dims {self.rho.dims} do not match S dims {s_dims} "
                                         f"plus E dims {e_dims}.")
        if not self.rho.is_psd(STATE_ATOL):
            raise InvalidStateError(f"Initial state is not Hermitian positive semi-definite within {STATE_ATOL}.")
        if not self.rho.has_unit_trace(STATE_ATOL):
            raise InvalidStateError(f"Initial state trace {self.rho.trace()} is not 1 within {STATE_ATOL}.")

        segments = []
        for j, segment in enumerate(self.segments):
            if not isinstance(segment, qmath.Operator):
                hamiltonian, dt = segment
                segment = qmath.evolve_unitary(hamiltonian, float(dt))
            if segment.dims != self.dims:
                raise DimensionMismatchError(f"Segment {j + 1} acts on dims {segment.dims}, expected {self.dims}.")
            if not _is_unitary(segment.data):
                raise DimensionMismatchError(f"Segment {j + 1} is not unitary within {UNITARY_ATOL}.")
            segments.append(segment)
        if not segments:
            raise DimensionMismatchError("A model needs at least one segment.")
        object.__setattr__(self, 'segments', tuple(segments))

    @property
    def dims(self) -> Tuple[int, ...]:
        """Subsystem dims of S (x) E"""
        return self.s_dims + self.e_dims

    @property
    def k(self) -> int:
        """Number of projection times"""
        return len(self.segments)

    @property
    def s_dim(self) -> int:
        """Total dimension of S"""
        return int(np.prod(self.s_dims))

    @property
    def environment(self) -> qmath.SubsystemSelector:
        """Selector for the environment subsystems within ``dims``"""
        return qmath.SubsystemSelector.span(len(self.s_dims), len(self.dims))


@dataclass(frozen=True, eq=False)
class TimeStep(comparisons.AttrComparable):
    """Projector schedule for one time of a family.

    Parameters
    ----------
    basis_unitary : qmath.Operator
        B_j on S. Column i is the basis vector with index i.
    rank_partition : Sequence[Sequence[int]]
        Ordered partition of the S basis indices. Group a spans the projector for outcome a.
    branch_map : Mapping[Tuple[int, ...], qmath.Operator]
        Optional extra unitaries keyed by the outcome prefix (alpha_1, ..., alpha_{j-1}). Prefixes that are
        absent use the identity.
    """
    basis_unitary: qmath.Operator
    rank_partition: Tuple[Tuple[int, ...], ...]
    branch_map: Dict[Tuple[int, ...], qmath.Operator] = field(default_factory=dict)

    def __post_init__(self):
        side = self.basis_unitary.side
        if not _is_unitary(self.basis_unitary.data):
            raise FamilyDefinitionError(f"Basis unitary is not unitary within {UNITARY_ATOL}.")
        partition = tuple(tuple(int(i) for i in group) for group in self.rank_partition)
        if any(len(group) == 0 for group in partition):
            raise FamilyDefinitionError(f"Rank partition {partition} contains an empty group.")
        if sorted(itertools.chain.from_iterable(partition)) != list(range(side)):
            raise FamilyDefinitionError(f"Rank partition {partition} does not cover the {side} basis indices "
                                        f"exactly once.")
        object.__setattr__(self, 'rank_partition', partition)

        branch_map = {}
        for prefix, unitary in self.branch_map.items():
            if unitary.dims != self.basis_unitary.dims or not _is_unitary(unitary.data):
                raise FamilyDefinitionError(f"Branch unitary for prefix {prefix} must be a unitary with dims "
                                            f"{self.basis_unitary.dims}.")
            branch_map[tuple(int(a) for a in prefix)] = unitary
        object.__setattr__(self, 'branch_map', branch_map)

    @property
    def n_outcomes(self) -> int:
        """Number of projectors m_j at this time"""
        return len(self.rank_partition)


@dataclass(frozen=True, eq=False)
class FamilySpec(comparisons.AttrComparable):
    """A family of histories given as one TimeStep per projection time.

    Parameters
    ----------
    steps : Sequence[TimeStep]
        Projector schedule, first time first
    s_dims : Sequence[int]
        Subsystem dims of S that every basis unitary acts on
    """
    steps: Tuple[TimeStep, ...]
    s_dims: Tuple[int, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        s_dims = tuple(int(d) for d in self.s_dims)
        object.__setattr__(self, 'steps', steps)
        object.__setattr__(self, 's_dims', s_dims)
        if not steps:
            raise FamilyDefinitionError("A family needs at least one time.")
        for j, step in enumerate(steps):
            if step.basis_unitary.dims != s_dims:
                raise DimensionMismatchError(f"Basis unitary at time {j + 1} has dims {step.basis_unitary.dims}, "
                                             f"expected {s_dims}.")
            for prefix in step.branch_map:
                self._validate_prefix(j, prefix)

    def _validate_prefix(self, j: int, prefix: Tuple[int, ...]):
        counts = self.outcome_counts[:j]
        if len(prefix) != j or any(not 0 <= a < m for a, m in zip(prefix, counts)):
            raise FamilyDefinitionError(f"Prefix {prefix} is not a valid outcome prefix for time {j + 1} "
                                        f"(outcome counts {counts}).")

    @property
    def k(self) -> int:
        """Number of projection times"""
        return len(self.steps)

    @property
    def outcome_counts(self) -> Tuple[int, ...]:
        """Number of projectors per time"""
        return tuple(step.n_outcomes for step in self.steps)

    def effective_basis(self, j: int, prefix: Sequence[int]) -> np.ndarray:
        """B~_j for the given prefix: the branch unitary (if any) composed with B_j. ``j`` is zero-based."""
        prefix = tuple(int(a) for a in prefix)
        self._validate_prefix(j, prefix)
        step = self.steps[j]
        branch = step.branch_map.get(prefix)
        if branch is None:
            return step.basis_unitary.data
        return branch.data @ step.basis_unitary.data


def history_labels(family: FamilySpec) -> List[HistoryLabel]:
    """All labels of a family in lexicographic order"""
    return [HistoryLabel(outcomes) for outcomes in itertools.product(*(range(m) for m in family.outcome_counts))]


def projector(family: FamilySpec, j: int, prefix: Sequence[int], a: int) -> qmath.Operator:
    """Projector for outcome ``a`` at (zero-based) time ``j`` given the earlier outcomes ``prefix``.

    Parameters
    ----------
    family : FamilySpec
        History family
    j : int
        Zero-based time index
    prefix : Sequence[int]
        Outcomes at the times before j
    a : int
        Outcome at time j

    Returns
    -------
    : qmath.Operator
        Hermitian, idempotent projector on S
    """
    if not 0 <= j < family.k:
        raise HistoryLabelError(f"Time index {j} is out of range for a family with {family.k} times.")
    partition = family.steps[j].rank_partition
    if not 0 <= a < len(partition):
        raise HistoryLabelError(f"Outcome {a} is out of range for {len(partition)} projectors at time {j + 1}.")
    basis = family.effective_basis(j, prefix)
    columns = basis[:, list(partition[a])]
    return qmath.Operator(family.s_dims, columns @ columns.conj().T)


def _check_compatible(model: ModelSpec, family: FamilySpec):
    if model.s_dims != family.s_dims:
        raise DimensionMismatchError(f"Model S dims {model.s_dims} do not match family S dims {family.s_dims}.")
    if model.k != family.k:
        raise DimensionMismatchError(f"Model has {model.k} segments but the family has {family.k} times.")


def class_operator(model: ModelSpec, family: FamilySpec, label: HistoryLabel) -> qmath.Operator:
    """Class operator of one history as an S (x) E operator.

    The product is accumulated Schrodinger-style, each segment unitary followed by its time's projector
    extended by the identity on E.
    """
    _check_compatible(model, family)
    label = HistoryLabel(label)
    label.validate(family.outcome_counts)
    environment_identity = qmath.identity(model.e_dims)
    c = qmath.identity(model.dims)
    for j, (segment, a) in enumerate(zip(model.segments, label)):
        p = qmath.tensor(projector(family, j, label[:j], a), environment_identity)
        c = p @ (segment @ c)
    return c


@dataclass(frozen=True, eq=False)
class DecoherenceMatrix(comparisons.AttrComparable):
    """Decoherence functional indexed by history labels.

    Parameters
    ----------
    mode : TraceMode
        FULL for complex scalar entries, PARTIAL for S-operator blocks
    labels : Sequence[HistoryLabel]
        Row and column labels, lexicographic
    entries : np.ndarray
        Shape (n, n) in full mode, (n, n, dS, dS) in partial mode
    s_dims : Sequence[int]
        Subsystem dims of the partial-mode blocks
    """
    mode: TraceMode
    labels: Tuple[HistoryLabel, ...]
    entries: np.ndarray
    s_dims: Tuple[int, ...] = ()

    def __post_init__(self):
        labels = tuple(HistoryLabel(label) for label in self.labels)
        object.__setattr__(self, 'labels', labels)
        entries = np.array(self.entries, dtype=complex)
        n = len(labels)
        expected = (n, n) if self.mode is TraceMode.FULL else (n, n) + (int(np.prod(self.s_dims)),) * 2
        if entries.shape != expected:
            raise DimensionMismatchError(f"Decoherence matrix entries have shape {entries.shape}, "
                                         f"expected {expected}.")
        entries.flags.writeable = False
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 's_dims', tuple(self.s_dims))

    def __len__(self):
        return len(self.labels)

    def index(self, label: HistoryLabel) -> int:
        """Row index of a label"""
        try:
            return self.labels.index(HistoryLabel(label))
        except ValueError as e:
            raise HistoryLabelError(f"Label {label} is not part of this family.") from e

    def __getitem__(self, pair: Tuple[HistoryLabel, HistoryLabel]) -> Union[complex, qmath.Operator]:
        i, j = (self.index(label) for label in pair)
        if self.mode is TraceMode.FULL:
            return complex(self.entries[i, j])
        return qmath.Operator(self.s_dims, self.entries[i, j])

    def diagonal(self) -> np.ndarray:
        """History probabilities: real part of the full-trace diagonal (traced blocks in partial mode)"""
        return np.real(np.diagonal(self.full_trace().entries)).copy()

    def full_trace(self) -> 'DecoherenceMatrix':
        """The full-trace matrix. Partial-mode blocks are traced over S."""
        if self.mode is TraceMode.FULL:
            return self
        return DecoherenceMatrix(TraceMode.FULL, self.labels, np.einsum('abii->ab', self.entries))

    def off_diagonal_weight(self) -> float:
        """Sum over distinct label pairs of |D|^2 (full) or the squared HS norm of the block (partial)"""
        squared = np.abs(self.entries) ** 2
        if self.mode is TraceMode.PARTIAL:
            squared = squared.sum(axis=(2, 3))
        return float(squared.sum() - np.trace(squared))


def decoherence_matrix(model: ModelSpec, family: FamilySpec, mode: TraceMode = TraceMode.FULL) -> DecoherenceMatrix:
    """Decoherence functional computed entry by entry from explicit class operators.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    family : FamilySpec
        History family
    mode : TraceMode
        FULL gives Tr(C_a rho C_b^dagger), PARTIAL gives Tr_E(C_a rho C_b^dagger)

    Returns
    -------
    : DecoherenceMatrix
    """
    mode = TraceMode(mode)
    _check_compatible(model, family)
    labels = history_labels(family)
    logger.debug(f"Computing {mode.value} decoherence matrix over {len(labels)} histories.")
    class_operators = [class_operator(model, family, label) for label in labels]
    branches = [c @ model.rho for c in class_operators]
    n = len(labels)
    if mode is TraceMode.FULL:
        entries = np.empty((n, n), dtype=complex)
    else:
        entries = np.empty((n, n, model.s_dim, model.s_dim), dtype=complex)
    environment = model.environment
    for i, branch in enumerate(branches):
        for j, c in enumerate(class_operators):
            overlap = branch @ c.dag()
            if mode is TraceMode.FULL:
                entries[i, j] = overlap.trace()
            else:
                entries[i, j] = qmath.partial_trace(overlap, environment).data
    return DecoherenceMatrix(mode, labels, entries, model.s_dims)


class ConsistencyCheck(NamedTuple):
    """Outcome of a consistency check"""
    consistent: bool
    max_violation: float


def check_consistency(d: DecoherenceMatrix, tol: float,
                      flavor: ConsistencyFlavor = ConsistencyFlavor.STRONG) -> ConsistencyCheck:
    """Evaluate a consistency condition on the off-diagonal entries of a decoherence matrix.

    Parameters
    ----------
    d : DecoherenceMatrix
        Full-mode matrix for the real-part and strong flavors, partial-mode matrix for the partial flavor
    tol : float
        Largest acceptable violation
    flavor : ConsistencyFlavor
        REAL_PART: max |Re D|. STRONG: max |D|. PARTIAL: max Hilbert-Schmidt norm of the off-diagonal blocks.

    Returns
    -------
    : ConsistencyCheck
    """
    flavor = ConsistencyFlavor(flavor)
    expected_mode = TraceMode.PARTIAL if flavor is ConsistencyFlavor.PARTIAL else TraceMode.FULL
    if d.mode is not expected_mode:
        raise ValueError(f"The {flavor.value} consistency flavor needs a {expected_mode.value}-mode matrix, "
                         f"got {d.mode.value}.")
    if flavor is ConsistencyFlavor.REAL_PART:
        magnitudes = np.abs(np.real(d.entries))
    elif flavor is ConsistencyFlavor.STRONG:
        magnitudes = np.abs(d.entries)
    else:
        magnitudes = np.sqrt(np.sum(np.abs(d.entries) ** 2, axis=(2, 3)))
    off_diagonal = ~np.eye(len(d), dtype=bool)
    violation = float(np.max(magnitudes[off_diagonal], initial=0.0))
    return ConsistencyCheck(violation <= tol, violation)


def pairwise_epsilon(d: DecoherenceMatrix) -> np.ndarray:
    """Approximate-consistency parameters |D(a,b)| / sqrt(D(a,a) D(b,b)) for every pair of distinct labels.

    Pairs involving a history with probability below ZERO_PROBABILITY are undefined and reported as NaN.
    The diagonal is zero.
    """
    if d.mode is not TraceMode.FULL:
        raise ValueError("Pairwise epsilon needs a full-mode decoherence matrix.")
    p = d.diagonal()
    defined = p >= ZERO_PROBABILITY
    normalizer = np.sqrt(np.outer(np.where(defined, p, 1.0), np.where(defined, p, 1.0)))
    epsilon = np.abs(d.entries) / normalizer
    epsilon[~np.outer(defined, defined)] = np.nan
    np.fill_diagonal(epsilon, 0.0)
    return epsilon
