"""Dense complex linear algebra over labeled tensor-product spaces

Operators are square complex matrices whose rows and columns are indexed by a tensor product of subsystems.
The ordering convention is row-major: the first entry of ``dims`` is the most significant digit of a basis index.
"""
# Standard
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence, Tuple, Union
# Installed
import numpy as np
import scipy.linalg as la
# Local
from consistent_histories.exceptions import DimensionMismatchError, HermiticityError, SubsystemSelectorError
from consistent_histories import comparisons

# Absolute, entrywise tolerance used for every Hermiticity check
HERMITIAN_ATOL = 1e-12

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class Operator(comparisons.AttrComparable):
    """A dense square operator on a tensor product of subsystems.

    Parameters
    ----------
    dims : Sequence[int]
        Ordered subsystem dimensions. An empty sequence denotes the trivial (scalar) space.
    data : array_like
        Square complex matrix with side equal to the product of ``dims``. The matrix is copied and made read-only.
    """
    dims: Tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims):
            raise DimensionMismatchError(f"Subsystem dimensions must be positive, got {dims}.")
        data = np.array(self.data, dtype=np.complex128)
        side = int(np.prod(dims)) if dims else 1
        if data.shape != (side, side):
            raise DimensionMismatchError(f"Operator with dims {dims} must be {side}x{side}, got shape {data.shape}.")
        data.flags.writeable = False
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'data', data)

    def __repr__(self):
        return f"<{self.__class__.__name__} dims={self.dims}>"

    @property
    def side(self) -> int:
        """Side length of the matrix"""
        return self.data.shape[0]

    def _check_same_dims(self, other: 'Operator'):
        if self.dims != other.dims:
            raise DimensionMismatchError(f"Operator dims {self.dims} and {other.dims} do not match.")

    def __matmul__(self, other: 'Operator') -> 'Operator':
        self._check_same_dims(other)
        return Operator(self.dims, self.data @ other.data)

    def __add__(self, other: 'Operator') -> 'Operator':
        self._check_same_dims(other)
        return Operator(self.dims, self.data + other.data)

    def __sub__(self, other: 'Operator') -> 'Operator':
        self._check_same_dims(other)
        return Operator(self.dims, self.data - other.data)

    def __mul__(self, scalar: complex) -> 'Operator':
        return Operator(self.dims, self.data * scalar)

    __rmul__ = __mul__

    def dag(self) -> 'Operator':
        """Adjoint (conjugate transpose)"""
        return Operator(self.dims, self.data.conj().T)

    def trace(self) -> complex:
        """Full trace"""
        return complex(np.trace(self.data))

    def purity(self) -> float:
        """Tr(m^2), real part, for a Hermitian operator"""
        return float(np.real(np.sum(self.data * self.data.T)))

    def is_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        """Check Hermiticity to an absolute entrywise tolerance"""
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= atol)

    def is_psd(self, atol: float = HERMITIAN_ATOL) -> bool:
        """Check that the operator is Hermitian with no eigenvalue below -atol"""
        if not self.is_hermitian(atol):
            return False
        hermitian_part = (self.data + self.data.conj().T) / 2
        return bool(la.eigvalsh(hermitian_part)[0] >= -atol)

    def has_unit_trace(self, atol: float = HERMITIAN_ATOL) -> bool:
        """Check Tr(m) = 1 to an absolute tolerance"""
        return bool(abs(self.trace() - 1) <= atol)


@dataclass(frozen=True)
class SubsystemSelector:
    """Set of positions into ``Operator.dims``.

    Parameters
    ----------
    indices : Iterable[int]
        Subsystem positions. Duplicates and negative positions are rejected.
    """
    indices: Tuple[int, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        if len(set(indices)) != len(indices):
            raise SubsystemSelectorError(f"Subsystem selector repeats an index: {indices}.")
        if any(i < 0 for i in indices):
            raise SubsystemSelectorError(f"Subsystem selector has a negative index: {indices}.")
        object.__setattr__(self, 'indices', tuple(sorted(indices)))

    @classmethod
    def of(cls, *indices: int) -> 'SubsystemSelector':
        """Convenience constructor from positional indices"""
        return cls(indices)

    @classmethod
    def span(cls, start: int, stop: int) -> 'SubsystemSelector':
        """Selector for the contiguous positions start, ..., stop - 1"""
        return cls(tuple(range(start, stop)))

    def validate(self, n_subsystems: int) -> None:
        """Raise SubsystemSelectorError if any index is out of range for ``n_subsystems`` subsystems."""
        if any(i >= n_subsystems for i in self.indices):
            raise SubsystemSelectorError(
                f"Subsystem selector {self.indices} is out of range for {n_subsystems} subsystems.")

    def complement(self, n_subsystems: int) -> 'SubsystemSelector':
        """The positions in range(n_subsystems) that are not selected"""
        self.validate(n_subsystems)
        return SubsystemSelector(tuple(i for i in range(n_subsystems) if i not in self.indices))


def identity(dims: Sequence[int]) -> Operator:
    """Identity operator on the given subsystems"""
    side = int(np.prod(dims)) if len(dims) else 1
    return Operator(tuple(dims), np.eye(side, dtype=complex))


def projector_from_vector(vector: Union[Sequence[complex], np.ndarray], dims: Sequence[int] = None) -> Operator:
    """Rank-one projector |v><v| onto a normalized copy of ``vector``.

    Parameters
    ----------
    vector : array_like
        State vector, not necessarily normalized
    dims : Sequence[int], Optional
        Subsystem dims. Defaults to a single subsystem of dimension len(vector).

    Returns
    -------
    : Operator
    """
    v = np.asarray(vector, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return Operator(tuple(dims) if dims is not None else (v.size,), np.outer(v, v.conj()))


def tensor(a: Operator, b: Operator) -> Operator:
    """Tensor (Kronecker) product with concatenated subsystem dims"""
    return Operator(a.dims + b.dims, np.kron(a.data, b.data))


def tensor_all(operators: Iterable[Operator]) -> Operator:
    """Tensor product of a sequence of operators, left to right"""
    return reduce(tensor, operators, identity(()))


def embed(op: Operator, position: int, dims: Sequence[int]) -> Operator:
    """Extend a single-subsystem operator to the full tensor product by identities.

    Parameters
    ----------
    op : Operator
        Operator acting on one subsystem
    position : int
        Position of that subsystem within ``dims``
    dims : Sequence[int]
        All subsystem dimensions

    Returns
    -------
    : Operator
    """
    dims = tuple(dims)
    if op.dims != (dims[position],):
        raise DimensionMismatchError(f"Cannot embed operator with dims {op.dims} at position {position} of {dims}.")
    return tensor_all([identity(dims[:position]), op, identity(dims[position + 1:])])


def evolve_unitary(h: Operator, dt: float) -> Operator:
    """Return exp(-i h dt) for a Hermitian generator h, computed by eigendecomposition.

    Parameters
    ----------
    h : Operator
        Hermitian generator (Hamiltonian)
    dt : float
        Dimensionless product of time and energy scale

    Returns
    -------
    : Operator
        Unitary with the same dims as h
    """
    if not h.is_hermitian():
        raise HermiticityError(f"Generator {h} is not Hermitian within {HERMITIAN_ATOL}.")
    eigenvalues, eigenvectors = la.eigh((h.data + h.data.conj().T) / 2)
    phases = np.exp(-1j * eigenvalues * dt)
    return Operator(h.dims, (eigenvectors * phases) @ eigenvectors.conj().T)


def partial_trace(m: Operator, discard: SubsystemSelector) -> Operator:
    """Trace out the selected subsystems, keeping the remaining ones in their original order."""
    n = len(m.dims)
    discard.validate(n)
    tensor_form = m.data.reshape(m.dims + m.dims)
    remaining = n
    for index in reversed(discard.indices):
        tensor_form = np.trace(tensor_form, axis1=index, axis2=index + remaining)
        remaining -= 1
    kept_dims = tuple(d for i, d in enumerate(m.dims) if i not in discard.indices)
    side = int(np.prod(kept_dims)) if kept_dims else 1
    return Operator(kept_dims, np.reshape(tensor_form, (side, side)))


def _digits(dims: Tuple[int, ...]) -> Tuple[np.ndarray, ...]:
    """Per-subsystem digits of every basis index"""
    side = int(np.prod(dims)) if dims else 1
    return np.unravel_index(np.arange(side), dims) if dims else ()


def dephase(m: Operator, on: SubsystemSelector) -> Operator:
    """Zero every entry whose row and column basis indices differ on the selected subsystems."""
    on.validate(len(m.dims))
    digits = _digits(m.dims)
    mask = np.ones(m.data.shape, dtype=bool)
    for index in on.indices:
        mask &= digits[index][:, None] == digits[index][None, :]
    return Operator(m.dims, np.where(mask, m.data, 0))


def hs_distance_sq(a: Operator, b: Operator) -> float:
    """Squared Hilbert-Schmidt distance Tr((a-b)^dagger (a-b))"""
    if a.dims != b.dims:
        raise DimensionMismatchError(f"Cannot compare operators with dims {a.dims} and {b.dims}.")
    return float(np.sum(np.abs(a.data - b.data) ** 2))
