"""Built-in models: a spin in a magnetic field, a chiral molecule under collisional decoherence, random fuzz models

The module also provides geodesic sphere meshes for scanning stationary single-qubit families over Bloch axes.
"""
# Standard
from dataclasses import dataclass
import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple
# Installed
import numpy as np
# Local
from consistent_histories import comparisons
from consistent_histories import qmath
from consistent_histories.histories import FamilySpec, ModelSpec, TimeStep

logger = logging.getLogger(__name__)

PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class SpinFieldConfig:
    """Spin-1/2 precessing in a magnetic field along z.

    Parameters
    ----------
    gamma_b_dt : float
        Azimuth advance of the spin per interval in radians
    k : int
        Projection times after the initial state
    """
    gamma_b_dt: float = 2.0
    k: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"The spin-field model needs at least one projection time, got k={self.k}.")


@dataclass(frozen=True)
class ChiralConfig:
    """Chiral molecule tunneling between |R> = |+> and |L> = |-> while colliding with environment molecules.

    Parameters
    ----------
    theta_z : float
        Tunneling rotation about z per interval in radians
    theta_x : float
        Strength of the chirality-controlled x rotation of each collision partner in radians
    collisions : int
        Number of collisions, one projection time right after each
    initial_chirality : str
        "R" or "L"
    """
    theta_z: float = 0.01
    theta_x: float = 5.0
    collisions: int = 5
    initial_chirality: str = "R"

    def __post_init__(self):
        if self.collisions < 1:
            raise ValueError(f"The chiral model needs at least one collision, got {self.collisions}.")
        if self.initial_chirality not in ("R", "L"):
            raise ValueError(f"Initial chirality must be 'R' or 'L', got '{self.initial_chirality}'.")


def spin_field_model(cfg: SpinFieldConfig = SpinFieldConfig()) -> ModelSpec:
    """Single qubit in |+> whose Bloch azimuth advances by ``cfg.gamma_b_dt`` per segment"""
    rho = qmath.projector_from_vector(PLUS)
    hamiltonian = qmath.Operator((2,), qmath.SIGMA_Z / 2)
    segments = [(hamiltonian, cfg.gamma_b_dt)] * cfg.k
    return ModelSpec(rho, segments, (2,), ())


def _local_operator(factors: Dict[int, np.ndarray], dims: Sequence[int]) -> qmath.Operator:
    """Tensor product with the given factors at their positions and identities elsewhere"""
    return qmath.tensor_all(qmath.Operator((d,), factors.get(position, np.eye(d)))
                            for position, d in enumerate(dims))


def chiral_model(cfg: ChiralConfig = ChiralConfig()) -> ModelSpec:
    """Chiral molecule S with one fresh environment qubit per collision.

    Each interval rotates S about z by ``theta_z`` and then rotates that interval's environment qubit about x
    by ``theta_x`` if S is left-handed. Environment qubits start in |0>.

    Parameters
    ----------
    cfg : ChiralConfig
        Model parameters

    Returns
    -------
    : ModelSpec
    """
    dims = (2,) * (1 + cfg.collisions)
    initial = PLUS if cfg.initial_chirality == "R" else MINUS
    environment_zero = np.zeros(2 ** cfg.collisions, dtype=complex)
    environment_zero[0] = 1
    rho = qmath.projector_from_vector(np.kron(initial, environment_zero), dims)

    tunneling = qmath.evolve_unitary(_local_operator({0: qmath.SIGMA_Z / 2}, dims), cfg.theta_z)
    left = np.outer(MINUS, MINUS.conj())
    segments = []
    for j in range(cfg.collisions):
        generator = _local_operator({0: left, 1 + j: qmath.SIGMA_X / 2}, dims)
        collision = qmath.evolve_unitary(generator, cfg.theta_x)
        segments.append(collision @ tunneling)
    logger.debug(f"Built chiral model with {cfg.collisions} collisions, theta_z={cfg.theta_z}, "
                 f"theta_x={cfg.theta_x}.")
    return ModelSpec(rho, segments, (2,), (2,) * cfg.collisions)


def _random_hermitian(rng: np.random.Generator, side: int) -> np.ndarray:
    a = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return (a + a.conj().T) / 2


def _random_unitary(rng: np.random.Generator, side: int) -> qmath.Operator:
    return qmath.evolve_unitary(qmath.Operator((side,), _random_hermitian(rng, side)), rng.uniform(0.5, 3.0))


def _random_state(rng: np.random.Generator, side: int) -> np.ndarray:
    rank = 1 if rng.random() < 0.5 else int(rng.integers(1, side + 1))
    g = rng.normal(size=(side, rank)) + 1j * rng.normal(size=(side, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def _random_partition(rng: np.random.Generator, side: int) -> Tuple[Tuple[int, ...], ...]:
    order = rng.permutation(side)
    n_groups = int(rng.integers(1, side + 1))
    cuts = sorted(rng.choice(np.arange(1, side), size=n_groups - 1, replace=False)) if n_groups > 1 else []
    return tuple(tuple(sorted(int(i) for i in group)) for group in np.split(order, cuts))


def random_model(dims: Tuple[int, int] = (2, 1), k: int = 2, seed: int = 0, coarse_grained: Optional[bool] = None,
                 branch_dependent: Optional[bool] = None) -> Tuple[ModelSpec, FamilySpec]:
    """Random model and family for fuzzing, fully determined by the seed.

    Parameters
    ----------
    dims : Tuple[int, int]
        (dim S, dim E), each at most 4. dim E = 1 means no environment.
    k : int
        Projection times, at most 3
    seed : int
        Random seed
    coarse_grained : bool, Optional
        Draw random rank partitions. Chosen at random when None.
    branch_dependent : bool, Optional
        Draw branch unitaries for later times. Chosen at random when None.

    Returns
    -------
    : Tuple[ModelSpec, FamilySpec]
    """
    s_dim, e_dim = (int(d) for d in dims)
    if not (1 <= s_dim <= 4 and 1 <= e_dim <= 4 and 1 <= k <= 3):
        raise ValueError(f"Random models need 1 <= dim S, dim E <= 4 and 1 <= k <= 3, got dims {dims}, k={k}.")
    rng = np.random.default_rng(seed)
    if coarse_grained is None:
        coarse_grained = bool(rng.random() < 0.5)
    if branch_dependent is None:
        branch_dependent = bool(rng.random() < 0.5)

    e_dims = (e_dim,) if e_dim > 1 else ()
    model_dims = (s_dim,) + e_dims
    side = s_dim * e_dim
    segments = [qmath.Operator(model_dims, _random_unitary(rng, side).data) for _ in range(k)]
    model = ModelSpec(qmath.Operator(model_dims, _random_state(rng, side)), segments, (s_dim,), e_dims)

    steps = []
    outcome_counts: List[int] = []
    for j in range(k):
        if coarse_grained:
            partition = _random_partition(rng, s_dim)
        else:
            partition = tuple((i,) for i in range(s_dim))
        branch_map = {}
        if branch_dependent and j > 0:
            prefixes = list(itertools.product(*(range(m) for m in outcome_counts)))
            chosen = [prefix for prefix in prefixes if rng.random() < 0.5] or [prefixes[-1]]
            branch_map = {prefix: _random_unitary(rng, s_dim) for prefix in chosen}
        steps.append(TimeStep(_random_unitary(rng, s_dim), partition, branch_map))
        outcome_counts.append(len(partition))
    return model, FamilySpec(tuple(steps), (s_dim,))


def axis_params(axis: Sequence[float]) -> np.ndarray:
    """Single-qubit-general parameters (theta, phi, 0) whose first basis vector points along ``axis``"""
    x, y, z = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    return np.array([np.arccos(np.clip(z, -1.0, 1.0)), np.arctan2(y, x), 0.0])


def _octahedron() -> Tuple[np.ndarray, List[Tuple[int, int, int]]]:
    vertices = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    faces = [(x, y, z) for x in (0, 1) for y in (2, 3) for z in (4, 5)]
    return vertices, faces


def _icosahedron() -> Tuple[np.ndarray, List[Tuple[int, int, int]]]:
    golden = (1 + np.sqrt(5)) / 2
    vertices = []
    for a, b in itertools.product((-1, 1), (-golden, golden)):
        vertices += [(0, a, b), (a, b, 0), (b, 0, a)]
    vertices = np.array(vertices, dtype=float)
    faces = [face for face in itertools.combinations(range(len(vertices)), 3)
             if all(np.isclose(np.linalg.norm(vertices[i] - vertices[j]), 2.0)
                    for i, j in itertools.combinations(face, 2))]
    return vertices / np.linalg.norm(vertices, axis=1, keepdims=True), faces


@dataclass(frozen=True, eq=False)
class SphereMesh(comparisons.AttrComparable):
    """Geodesic mesh of unit vectors with lattice adjacency.

    Parameters
    ----------
    vertices : np.ndarray
        Unit vectors, shape (n, 3)
    neighbors : Sequence[Tuple[int, ...]]
        Indices of the mesh neighbors of every vertex
    """
    vertices: np.ndarray
    neighbors: Tuple[Tuple[int, ...], ...]

    @classmethod
    def geodesic(cls, frequency: int = 4, base: str = "octahedron") -> 'SphereMesh':
        """Subdivide every face of a base polyhedron into frequency^2 triangles and project onto the sphere.

        Parameters
        ----------
        frequency : int
            Subdivisions per base edge
        base : str
            "octahedron" (4 f^2 + 2 vertices, contains the coordinate axes) or "icosahedron" (10 f^2 + 2 vertices)

        Returns
        -------
        : SphereMesh
        """
        if frequency < 1:
            raise ValueError(f"Mesh frequency must be positive, got {frequency}.")
        if base == "octahedron":
            corners, faces = _octahedron()
        elif base == "icosahedron":
            corners, faces = _icosahedron()
        else:
            raise ValueError(f"Unknown mesh base '{base}'.")

        index_of: Dict[Tuple[float, ...], int] = {}
        vertices: List[np.ndarray] = []
        edges = set()

        def vertex(point: np.ndarray) -> int:
            point = point / np.linalg.norm(point)
            key = tuple(np.round(point, 9) + 0.0)
            if key not in index_of:
                index_of[key] = len(vertices)
                vertices.append(point)
            return index_of[key]

        for a, b, c in faces:
            local = {}
            for i in range(frequency + 1):
                for j in range(frequency + 1 - i):
                    weight = np.array([frequency - i - j, i, j]) / frequency
                    local[(i, j)] = vertex(weight @ corners[[a, b, c]])
            for (i, j), here in local.items():
                for step in ((1, 0), (0, 1), (-1, 1)):
                    there = local.get((i + step[0], j + step[1]))
                    if there is not None and there != here:
                        edges.add((min(here, there), max(here, there)))

        neighbors = [set() for _ in vertices]
        for first, second in edges:
            neighbors[first].add(second)
            neighbors[second].add(first)
        logger.debug(f"Built {base} mesh of frequency {frequency} with {len(vertices)} vertices.")
        return cls(np.array(vertices), tuple(tuple(sorted(n)) for n in neighbors))

    def __len__(self):
        return len(self.vertices)

    @property
    def n_params(self) -> int:
        """Parameters per vertex, always the three single-qubit-general angles"""
        return 3

    def nearest(self, axis: Sequence[float]) -> int:
        """Index of the vertex closest to ``axis``"""
        axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
        return int(np.argmax(self.vertices @ axis))

    def points(self) -> np.ndarray:
        """Single-qubit-general parameters of every vertex, shape (n, 3)"""
        return np.array([axis_params(v) for v in self.vertices])
