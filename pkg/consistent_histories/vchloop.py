"""Inconsistency costs, landscape scans and the classical parameter optimization loop"""
# Standard
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import partial
import itertools
import logging
import math
import time
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple
# Installed
import numpy as np
from scipy.optimize import OptimizeResult, minimize
# Local
from consistent_histories import comparisons
from consistent_histories import qmath
from consistent_histories.ansatz import AnsatzSpec
from consistent_histories.branchstate import BranchedState, build_branched_state
from consistent_histories.estimators import ShotPlan, dephased_purity, purity
from consistent_histories.histories import ModelSpec, projector

logger = logging.getLogger(__name__)

EXACT_ACCEPTANCE = 1e-8
SAMPLED_ACCEPTANCE_STDERRS = 3.0
# Minima whose projectors agree entrywise to this tolerance describe the same family
SAME_FAMILY_ATOL = 1e-8


class CostMode(Enum):
    """Which cost drives a scan or an optimization"""
    FULL = "full"
    PARTIAL = "partial"
    BOTH = "both"
    TILDE = "tilde"
    TILDE_PARTIAL = "tilde-partial"

    @property
    def needs_partial(self) -> bool:
        """Whether the partial-trace cost has to be evaluated"""
        return self in (CostMode.PARTIAL, CostMode.BOTH, CostMode.TILDE_PARTIAL)


def _ratio(value: float, value_stderr: float, denominator: float, denominator_stderr: float) -> Tuple[float, float]:
    if denominator <= 0:
        return math.inf, math.inf
    ratio = value / denominator
    stderr = math.sqrt((value_stderr / denominator) ** 2 + (value * denominator_stderr / denominator ** 2) ** 2)
    return ratio, stderr


@dataclass(frozen=True)
class CostValue:
    """Cost values of one parameter point with their standard errors (zero when exact).

    Parameters
    ----------
    c : float
        Full-trace cost Tr((sigma^A)^2) - Tr(Z(sigma^A)^2)
    c_stderr : float
        Standard error of c
    p_diag : float
        Purity Tr(Z(sigma^A)^2) of the dephased ancilla state
    p_diag_stderr : float
        Standard error of p_diag
    c_pt : float, Optional
        Partial-trace cost, when it was evaluated
    c_pt_stderr : float, Optional
        Standard error of c_pt
    c_tilde : float, Optional
        Entropy-penalized full-trace cost c / p_diag
    c_tilde_stderr : float, Optional
        Standard error of c_tilde
    c_pt_tilde : float, Optional
        Entropy-penalized partial-trace cost c_pt / p_diag
    c_pt_tilde_stderr : float, Optional
        Standard error of c_pt_tilde
    """
    c: float
    c_stderr: float
    p_diag: float
    p_diag_stderr: float
    c_pt: Optional[float] = None
    c_pt_stderr: Optional[float] = None
    c_tilde: Optional[float] = None
    c_tilde_stderr: Optional[float] = None
    c_pt_tilde: Optional[float] = None
    c_pt_tilde_stderr: Optional[float] = None

    def objective(self, which: CostMode) -> Tuple[float, float]:
        """Value and standard error of the cost selected by ``which``. BOTH sums the two costs."""
        which = CostMode(which)
        if which is CostMode.FULL:
            return self.c, self.c_stderr
        if which is CostMode.TILDE:
            return self.c_tilde, self.c_tilde_stderr
        if self.c_pt is None:
            raise ValueError(f"The {which.value} objective needs the partial-trace cost, which was not evaluated.")
        if which is CostMode.PARTIAL:
            return self.c_pt, self.c_pt_stderr
        if which is CostMode.TILDE_PARTIAL:
            return self.c_pt_tilde, self.c_pt_tilde_stderr
        return self.c + self.c_pt, math.hypot(self.c_stderr, self.c_pt_stderr)

    def to_dict(self) -> dict:
        """Plain dictionary of every field"""
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


def cost_from_state(state: BranchedState, which: CostMode, plan: ShotPlan) -> CostValue:
    """Costs of a branched state as differences of purities.

    Parameters
    ----------
    state : BranchedState
        sigma^SA and sigma^A of the family
    which : CostMode
        Partial-trace costs are evaluated only when this mode needs them
    plan : ShotPlan
        Exact or sampled evaluation of every purity

    Returns
    -------
    : CostValue
    """
    which = CostMode(which)
    sigma_a = state.sigma_a
    swap = purity(sigma_a, plan, tag="sigma_a/swap")
    dip = dephased_purity(sigma_a, qmath.SubsystemSelector.span(0, len(sigma_a.dims)), plan, tag="sigma_a/dip")
    c = swap.value - dip.value
    c_stderr = math.hypot(swap.stderr, dip.stderr)
    c_tilde, c_tilde_stderr = _ratio(c, c_stderr, dip.value, dip.stderr)
    values = dict(c=c, c_stderr=c_stderr, p_diag=dip.value, p_diag_stderr=dip.stderr,
                  c_tilde=c_tilde, c_tilde_stderr=c_tilde_stderr)
    if which.needs_partial:
        swap_sa = purity(state.sigma_sa, plan, tag="sigma_sa/swap")
        pdip = dephased_purity(state.sigma_sa, state.ancillas, plan, tag="sigma_sa/pdip")
        c_pt = swap_sa.value - pdip.value
        c_pt_stderr = math.hypot(swap_sa.stderr, pdip.stderr)
        c_pt_tilde, c_pt_tilde_stderr = _ratio(c_pt, c_pt_stderr, dip.value, dip.stderr)
        values.update(c_pt=c_pt, c_pt_stderr=c_pt_stderr,
                      c_pt_tilde=c_pt_tilde, c_pt_tilde_stderr=c_pt_tilde_stderr)
    return CostValue(**values)


def cost(model: ModelSpec, ansatz: AnsatzSpec, which: CostMode = CostMode.FULL,
         plan: ShotPlan = ShotPlan()) -> CostValue:
    """Build the branched state of the ansatz family and evaluate its costs.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    ansatz : AnsatzSpec
        Parameterized family at the point of interest
    which : CostMode
        Selects whether partial-trace costs are evaluated
    plan : ShotPlan
        Exact or sampled evaluation

    Returns
    -------
    : CostValue
    """
    return cost_from_state(build_branched_state(model, ansatz.family()), which, plan)


@dataclass(frozen=True, eq=False)
class ParameterGrid(comparisons.AttrComparable):
    """Cartesian grid of parameter points, enumerated row-major (last axis fastest).

    Parameters
    ----------
    axes : Sequence[np.ndarray]
        Sample values per parameter
    """
    axes: Tuple[np.ndarray, ...]

    def __post_init__(self):
        axes = tuple(np.array(axis, dtype=float).ravel() for axis in self.axes)
        if not axes or any(axis.size == 0 for axis in axes):
            raise ValueError("A parameter grid needs at least one axis and no empty axes.")
        object.__setattr__(self, 'axes', axes)

    @classmethod
    def from_ranges(cls, ranges: Sequence[Tuple[float, float]], counts: Sequence[int],
                    endpoint: bool = False) -> 'ParameterGrid':
        """Evenly spaced axes over [low, high) (or [low, high] with ``endpoint``)"""
        if len(ranges) != len(counts):
            raise ValueError(f"Got {len(ranges)} ranges but {len(counts)} counts.")
        return cls(tuple(np.linspace(low, high, int(count), endpoint=endpoint)
                         for (low, high), count in zip(ranges, counts)))

    def __len__(self):
        return int(np.prod([axis.size for axis in self.axes]))

    @property
    def n_params(self) -> int:
        """Parameters per grid point"""
        return len(self.axes)

    def points(self) -> np.ndarray:
        """All grid points, shape (n_points, n_parameters)"""
        return np.array(list(itertools.product(*self.axes)), dtype=float)


class LandscapeRow(NamedTuple):
    """One evaluated point of a landscape scan"""
    params: np.ndarray
    cost: CostValue


def _evaluate_point(model: ModelSpec, ansatz: AnsatzSpec, which: CostMode, plan: ShotPlan,
                    indexed_params: Tuple[int, np.ndarray]) -> LandscapeRow:
    index, params = indexed_params
    point_plan = plan if plan.exact else plan.derive(index)
    return LandscapeRow(np.asarray(params), cost(model, ansatz.with_params(params), which, point_plan))


def landscape_scan(model: ModelSpec, ansatz: AnsatzSpec, grid, which: CostMode = CostMode.FULL,
                   plan: ShotPlan = ShotPlan(), workers: int = 1) -> List[LandscapeRow]:
    """Evaluate the cost at every point of a grid.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    ansatz : AnsatzSpec
        Template whose parameters are replaced by each grid point
    grid : ParameterGrid or models.SphereMesh
        Anything with a ``points()`` method returning an (n_points, n_params) array
    which : CostMode
        Cost to evaluate
    plan : ShotPlan
        Exact or sampled evaluation. Sampled points use seeds derived from their index.
    workers : int
        Worker processes. Output order does not depend on this.

    Returns
    -------
    : List[LandscapeRow]
        One row per grid point, in grid order
    """
    which = CostMode(which)
    points = np.asarray(grid.points(), dtype=float)
    if points.ndim != 2 or points.shape[1] != ansatz.n_params:
        raise ValueError(f"Grid points have shape {points.shape}; the ansatz takes {ansatz.n_params} parameters.")
    logger.info(f"Scanning {which.value} cost over {len(points)} points with {workers} worker(s).")
    start = time.perf_counter()
    evaluate = partial(_evaluate_point, model, ansatz, which, plan)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate, enumerate(points), chunksize=max(1, len(points) // (4 * workers))))
    else:
        rows = [evaluate(indexed) for indexed in enumerate(points)]
    logger.info(f"Landscape scan finished in {time.perf_counter() - start:.2f} s.")
    return rows


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings of the restarted Nelder-Mead search.

    Parameters
    ----------
    restarts : int
        Number of independent simplex searches. The first starts at the ansatz parameters.
    max_evaluations : int
        Cost evaluations allowed per restart
    simplex_scale : float
        Edge length of the initial simplex in radians
    fatol : float
        Convergence threshold on the spread of simplex cost values in exact mode. Sampled runs use twice the
        cost standard error at the start point.
    xatol : float
        Convergence threshold on the simplex size
    acceptance : float, Optional
        Cost below which a terminal point counts as a minimum. Defaults to 1e-8 exact and three standard errors
        of the cost at the candidate when sampled.
    dedup_radius : float
        Minima closer than this in periodic max-norm are reported once
    """
    restarts: int = 20
    max_evaluations: int = 2000
    simplex_scale: float = 0.3
    fatol: float = 1e-10
    xatol: float = 1e-8
    acceptance: Optional[float] = None
    dedup_radius: float = 0.1

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"At least one restart is needed, got {self.restarts}.")
        if self.max_evaluations < 1:
            raise ValueError(f"The evaluation budget must be positive, got {self.max_evaluations}.")
        if self.simplex_scale <= 0 or self.fatol <= 0 or self.xatol <= 0 or self.dedup_radius < 0:
            raise ValueError("Simplex scale and tolerances must be positive.")


@dataclass(frozen=True)
class RestartRecord:
    """Bookkeeping for one simplex search"""
    index: int
    start: np.ndarray
    params: np.ndarray
    value: float
    stderr: float
    evaluations: int
    converged: bool
    budget_exhausted: bool
    accepted: bool


@dataclass(frozen=True)
class Minimum:
    """An accepted, deduplicated minimum"""
    params: np.ndarray
    cost: CostValue
    restart: int


@dataclass(frozen=True)
class OptimizationResult:
    """Minima and per-restart records of an optimization"""
    minima: List[Minimum]
    restarts: List[RestartRecord]

    @property
    def evaluations(self) -> int:
        """Total cost evaluations across restarts"""
        return sum(record.evaluations for record in self.restarts)


def nelder_mead(func: Callable[[np.ndarray], float], x0: Sequence[float], opt: OptimizerConfig,
                fatol: Optional[float] = None) -> OptimizeResult:
    """One simplex search from ``x0`` with an axis-aligned initial simplex of edge ``opt.simplex_scale``.

    Parameters
    ----------
    func : Callable
        Objective of a parameter vector
    x0 : Sequence[float]
        Start point, kept as the first simplex vertex
    opt : OptimizerConfig
        Budget and tolerances
    fatol : float, Optional
        Overrides ``opt.fatol``

    Returns
    -------
    : scipy.optimize.OptimizeResult
    """
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0, x0 + opt.simplex_scale * np.eye(x0.size)])
    options = {"initial_simplex": simplex, "xatol": opt.xatol, "fatol": opt.fatol if fatol is None else fatol,
               "maxfev": opt.max_evaluations, "maxiter": opt.max_evaluations}
    return minimize(func, x0, method="Nelder-Mead", options=options)


def periodic_distance(a: np.ndarray, b: np.ndarray, period: float) -> float:
    """Max-norm distance between parameter vectors, each coordinate taken modulo ``period``"""
    difference = np.mod(np.asarray(a) - np.asarray(b) + period / 2, period) - period / 2
    return float(np.max(np.abs(difference), initial=0.0))


def _family_projectors(ansatz: AnsatzSpec, params: np.ndarray) -> np.ndarray:
    """Every projector of a branch-independent ansatz family, stacked in time and outcome order"""
    family = ansatz.with_params(params).family()
    return np.array([projector(family, j, (0,) * j, a).data
                     for j in range(family.k) for a in range(family.outcome_counts[j])])


def _run_restart(model: ModelSpec, ansatz: AnsatzSpec, which: CostMode, plan: ShotPlan, opt: OptimizerConfig,
                 indexed_start: Tuple[int, np.ndarray]) -> Tuple[RestartRecord, CostValue]:
    index, start = indexed_start
    evaluations = itertools.count(1)

    def objective(params: np.ndarray) -> float:
        evaluation_plan = plan if plan.exact else plan.derive(index, next(evaluations))
        value, _ = cost(model, ansatz.with_params(params), which, evaluation_plan).objective(which)
        return value

    fatol = opt.fatol
    if not plan.exact:
        _, start_stderr = cost(model, ansatz.with_params(start), which, plan.derive(index, 0)).objective(which)
        fatol = 2 * start_stderr if start_stderr > 0 else opt.fatol
    result = nelder_mead(objective, start, opt, fatol)

    final_plan = plan if plan.exact else plan.derive(index, result.nfev + 1)
    final = cost(model, ansatz.with_params(result.x), which, final_plan)
    value, stderr = final.objective(which)
    if opt.acceptance is not None:
        threshold = opt.acceptance
    else:
        threshold = EXACT_ACCEPTANCE if plan.exact else SAMPLED_ACCEPTANCE_STDERRS * stderr
    budget_exhausted = not result.success
    record = RestartRecord(index, np.asarray(start), np.mod(result.x, ansatz.period), value, stderr,
                           int(result.nfev), bool(result.success), budget_exhausted, bool(value <= threshold))
    return record, final


def optimize(model: ModelSpec, ansatz: AnsatzSpec, which: CostMode = CostMode.FULL, plan: ShotPlan = ShotPlan(),
             opt: OptimizerConfig = OptimizerConfig(), workers: int = 1) -> OptimizationResult:
    """Restarted derivative-free minimization of a cost over the ansatz parameters.

    Restart 0 starts at the ansatz's own parameters; the others start at uniform draws over one period. Every
    terminal point whose cost is below the acceptance threshold is kept. Accepted points that lie within
    ``opt.dedup_radius`` of a better one (modulo the ansatz period), or whose projectors coincide with a better
    one's, are dropped.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    ansatz : AnsatzSpec
        Parameterization and start point
    which : CostMode
        Objective
    plan : ShotPlan
        Exact or sampled evaluation
    opt : OptimizerConfig
        Restarts, budget and tolerances
    workers : int
        Worker processes for the restarts. Results do not depend on this.

    Returns
    -------
    : OptimizationResult
    """
    which = CostMode(which)
    rng = plan.rng("optimizer-starts")
    starts = [np.asarray(ansatz.params, dtype=float)]
    starts += [ansatz.random_params(rng) for _ in range(opt.restarts - 1)]
    logger.info(f"Optimizing {which.value} cost with {opt.restarts} restart(s), "
                f"{'exact' if plan.exact else f'{plan.shots} shots'}.")

    run = partial(_run_restart, model, ansatz, which, plan, opt)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run, enumerate(starts)))
    else:
        outcomes = [run(indexed) for indexed in enumerate(starts)]

    records = [record for record, _ in outcomes]
    for record in records:
        logger.debug(f"Restart {record.index}: cost {record.value:.3e} +/- {record.stderr:.1e} after "
                     f"{record.evaluations} evaluations at {record.params}.")
        if record.budget_exhausted:
            logger.warning(f"Restart {record.index} exhausted its budget of {opt.max_evaluations} evaluations.")

    candidates = sorted((outcome for outcome in outcomes if outcome[0].accepted),
                        key=lambda outcome: (outcome[0].value, outcome[0].index))
    minima: List[Minimum] = []
    kept_projectors: List[np.ndarray] = []
    for record, final in candidates:
        projectors = _family_projectors(ansatz, record.params)
        distinct = all(periodic_distance(record.params, kept.params, ansatz.period) > opt.dedup_radius
                       and np.max(np.abs(projectors - other)) > SAME_FAMILY_ATOL
                       for kept, other in zip(minima, kept_projectors))
        if distinct:
            minima.append(Minimum(record.params, final, record.index))
            kept_projectors.append(projectors)
    logger.info(f"Accepted {sum(r.accepted for r in records)} terminal point(s), {len(minima)} distinct minima.")
    return OptimizationResult(minima, records)
