"""Property suites behind ``vch verify``

Each suite runs over a corpus of seeded random models and families and reports the largest violation found.
"""
# Standard
from dataclasses import dataclass
import logging
import time
from typing import Callable, Iterator, List, Tuple
# Installed
import numpy as np
# Local
from consistent_histories import qmath
from consistent_histories.branchstate import build_branched_state, to_decoherence_matrix
from consistent_histories.estimators import ShotPlan
from consistent_histories.exceptions import VerificationError
from consistent_histories.histories import (
    FamilySpec, ModelSpec, TraceMode, decoherence_matrix, history_labels, projector)
from consistent_histories.models import random_model
from consistent_histories.vchloop import CostMode, cost_from_state

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-12
# Slack on the probability sum and the smallest eigenvalue of the full-trace functional
FUNCTIONAL_ATOL = 1e-10


@dataclass(frozen=True)
class SuiteResult:
    """Outcome of one property suite"""
    name: str
    passed: bool
    max_violation: float
    cases: int
    seconds: float


def corpus_parameters(index: int) -> Tuple[Tuple[int, int], int]:
    """(dim S, dim E) and k of corpus member ``index``, cycling through every size combination"""
    s_dim = 2 + index % 3
    e_dim = 1 + (index // 3) % 4
    k = 1 + (index // 12) % 3
    return (s_dim, e_dim), k


def random_corpus(n_models: int, seed: int = 0) -> Iterator[Tuple[ModelSpec, FamilySpec]]:
    """Seeded random (model, family) pairs including coarse-grained and branch-dependent families"""
    for index in range(n_models):
        dims, k = corpus_parameters(index)
        yield random_model(dims, k, seed=seed * 100003 + index)


def route_equivalence(model: ModelSpec, family: FamilySpec) -> float:
    """Largest entrywise difference between the branched-state and class-operator functionals, both modes"""
    state = build_branched_state(model, family)
    violation = 0.0
    for mode in TraceMode:
        circuit = to_decoherence_matrix(state, mode)
        oracle = decoherence_matrix(model, family, mode)
        violation = max(violation, float(np.max(np.abs(circuit.entries - oracle.entries))))
    return violation


def cost_identities(model: ModelSpec, family: FamilySpec) -> float:
    """Largest difference between each exact cost and the off-diagonal weight of its decoherence functional"""
    value = cost_from_state(build_branched_state(model, family), CostMode.BOTH, ShotPlan())
    full = decoherence_matrix(model, family, TraceMode.FULL).off_diagonal_weight()
    partial = decoherence_matrix(model, family, TraceMode.PARTIAL).off_diagonal_weight()
    return max(abs(value.c - full), abs(value.c_pt - partial))


def completeness(model: ModelSpec, family: FamilySpec) -> float:
    """Largest deviation from projector completeness, or excess beyond FUNCTIONAL_ATOL of the functional's
    probability sum and negativity"""
    violation = 0.0
    identity = qmath.identity(family.s_dims).data
    for label in history_labels(family):
        for j in range(family.k):
            total = sum(projector(family, j, label[:j], a).data for a in range(family.outcome_counts[j]))
            violation = max(violation, float(np.max(np.abs(total - identity))))
    d = decoherence_matrix(model, family, TraceMode.FULL)
    violation = max(violation, abs(float(np.sum(d.diagonal())) - 1.0) - FUNCTIONAL_ATOL)
    eigenvalues = np.linalg.eigvalsh((d.entries + d.entries.conj().T) / 2)
    violation = max(violation, -float(eigenvalues[0]) - FUNCTIONAL_ATOL)
    return violation


SUITES: List[Tuple[str, Callable[[ModelSpec, FamilySpec], float]]] = [
    ("route-equivalence", route_equivalence),
    ("cost-identities", cost_identities),
    ("completeness", completeness),
]


def run_suites(n_models: int = 100, seed: int = 0, tol: float = DEFAULT_TOLERANCE) -> List[SuiteResult]:
    """Run every suite over the same random corpus.

    Parameters
    ----------
    n_models : int
        Corpus size
    seed : int
        Corpus seed
    tol : float
        Largest acceptable violation

    Returns
    -------
    : List[SuiteResult]
    """
    corpus = list(random_corpus(n_models, seed))
    results = []
    for name, check in SUITES:
        start = time.perf_counter()
        violation = max((check(model, family) for model, family in corpus), default=0.0)
        result = SuiteResult(name, violation <= tol, violation, len(corpus), time.perf_counter() - start)
        logger.info(f"Suite {name}: max violation {violation:.3e} over {len(corpus)} cases "
                    f"in {result.seconds:.2f} s.")
        results.append(result)
    return results


def verify(n_models: int = 100, seed: int = 0, tol: float = DEFAULT_TOLERANCE) -> List[SuiteResult]:
    """Run every suite and raise VerificationError naming the first one that fails"""
    results = run_suites(n_models, seed, tol)
    for result in results:
        if not result.passed:
            raise VerificationError(f"Suite {result.name} failed with max violation {result.max_violation:.3e} "
                                    f"(tolerance {tol:.0e}).", invariant=result.name)
    return results
