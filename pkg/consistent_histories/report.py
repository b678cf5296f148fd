"""Probability readout, family splitting and approximate-consistency bounds

A readout samples history labels from the diagonal of sigma^A. Histories read often enough to be characterized
with relative precision eps_max are retained; all others are merged into a single coarse-grained remainder
history. Pairwise epsilon values follow from the full-trace cost, since every off-diagonal entry satisfies
|D(a,b)|^2 <= C/2. The remainder contributes delta^2 = p(remainder) / p(least likely retained history).
"""
# Standard
from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Dict, List, NamedTuple, Optional, Tuple, Union
# Installed
import numpy as np
# Local
from consistent_histories.branchstate import BranchedState, build_branched_state
from consistent_histories.estimators import ShotPlan
from consistent_histories.histories import (
    ZERO_PROBABILITY, DecoherenceMatrix, FamilySpec, HistoryLabel, ModelSpec)
from consistent_histories.vchloop import CostMode, CostValue, cost_from_state

logger = logging.getLogger(__name__)

# Diagonal entries of sigma^A more negative than this are reported when clipped
NEGATIVE_PROBABILITY_ATOL = 1e-12


class ThresholdMode(Enum):
    """How the retention count threshold follows from eps_max"""
    POISSON = "poisson"
    SQRT_N = "sqrt-n"


def threshold_count(n_readout: int, eps_max: float, mode: ThresholdMode = ThresholdMode.POISSON) -> float:
    """Smallest readout count that retains a history.

    Parameters
    ----------
    n_readout : int
        Readout shots
    eps_max : float
        Target relative precision in (0, 1]
    mode : ThresholdMode
        POISSON: ceil(1 / eps_max^2), the count with relative Poisson error eps_max.
        SQRT_N: sqrt(n_readout) / eps_max, the literal frequency cutoff.

    Returns
    -------
    : float
    """
    if not 0 < eps_max <= 1:
        raise ValueError(f"eps_max must lie in (0, 1], got {eps_max}.")
    if ThresholdMode(mode) is ThresholdMode.POISSON:
        return float(math.ceil(1 / eps_max ** 2 - 1e-9))
    return math.sqrt(n_readout) / eps_max


class RetainedHistory(NamedTuple):
    """A history read often enough to keep"""
    label: HistoryLabel
    probability: float
    count: float


@dataclass(frozen=True)
class Readout:
    """Result of a probability readout.

    Parameters
    ----------
    retained : List[RetainedHistory]
        Retained histories in label order
    remainder_probability : float
        Probability of the coarse-grained history of everything not retained
    n_readout : int
        Readout shots
    threshold_count : float
        Count needed for retention
    frequencies : Dict[HistoryLabel, float]
        Readout probability of every label (exact diagonal or sampled frequency)
    """
    retained: List[RetainedHistory]
    remainder_probability: float
    n_readout: int
    threshold_count: float
    frequencies: Dict[HistoryLabel, float] = field(default_factory=dict)


def probability_readout(state: BranchedState, n_readout: int, eps_max: float, plan: ShotPlan = ShotPlan(),
                        mode: ThresholdMode = ThresholdMode.POISSON) -> Readout:
    """Read history probabilities off the diagonal of sigma^A and split the family.

    Parameters
    ----------
    state : BranchedState
        Branched state of the family
    n_readout : int
        Readout shots. In exact mode the counts are the expected counts p * n_readout.
    eps_max : float
        Target relative precision in (0, 1]
    plan : ShotPlan
        Exact (expected counts) or sampled (multinomial counts) readout. Only the seed is used when sampled.
    mode : ThresholdMode
        Retention threshold rule

    Returns
    -------
    : Readout
    """
    if n_readout < 1:
        raise ValueError(f"Readout needs at least one shot, got {n_readout}.")
    threshold = threshold_count(n_readout, eps_max, mode)
    diagonal = np.real(np.diagonal(state.sigma_a.data))
    if np.min(diagonal) < -NEGATIVE_PROBABILITY_ATOL:
        logger.warning(f"Clipping negative diagonal entries of sigma^A down to {np.min(diagonal):.3e}.")
    probabilities = np.clip(diagonal, 0.0, None)
    probabilities = probabilities / probabilities.sum()

    if plan.exact:
        counts = probabilities * n_readout
        readout_probabilities = probabilities
    else:
        counts = plan.rng("readout").multinomial(n_readout, probabilities).astype(float)
        readout_probabilities = counts / n_readout

    labels = state.labels
    retained = [RetainedHistory(label, float(p), float(count))
                for label, p, count in zip(labels, readout_probabilities, counts) if count >= threshold]
    remainder = float(max(1.0 - sum(history.probability for history in retained), 0.0))
    logger.info(f"Retained {len(retained)} of {len(labels)} histories at threshold count {threshold:g}; "
                f"remainder probability {remainder:.3e}.")
    return Readout(retained, remainder, int(n_readout), threshold,
                   {label: float(p) for label, p in zip(labels, readout_probabilities)})


class EpsilonBounds(NamedTuple):
    """Pairwise epsilons over retained pairs, delta and their maximum"""
    pairs: Dict[Tuple[HistoryLabel, HistoryLabel], float]
    delta: float
    bound: float


def epsilon_bounds(c: Union[float, DecoherenceMatrix], retained: List[RetainedHistory],
                   remainder_probability: float) -> EpsilonBounds:
    """Approximate-consistency bounds of a split family.

    Parameters
    ----------
    c : float or DecoherenceMatrix
        Full-trace cost, or a full-mode decoherence matrix whose off-diagonal weight is used as the cost
    retained : List[RetainedHistory]
        Retained histories with their probabilities
    remainder_probability : float
        Probability of the coarse-grained remainder history

    Returns
    -------
    : EpsilonBounds
        Pairs with a zero-probability member are NaN and do not enter the bound. An empty retained set gives an
        infinite delta and bound.
    """
    if isinstance(c, DecoherenceMatrix):
        c = c.full_trace().off_diagonal_weight()
    c = max(float(c), 0.0)
    pairs = {}
    for i, first in enumerate(retained):
        for second in retained[i + 1:]:
            product = first.probability * second.probability
            if first.probability < ZERO_PROBABILITY or second.probability < ZERO_PROBABILITY:
                pairs[(first.label, second.label)] = math.nan
            else:
                pairs[(first.label, second.label)] = math.sqrt(c / (2 * product))

    if not retained:
        return EpsilonBounds(pairs, math.inf, math.inf)
    least_likely = min(history.probability for history in retained)
    if least_likely < ZERO_PROBABILITY:
        delta = math.inf
    else:
        delta = math.sqrt(max(remainder_probability, 0.0) / least_likely)
    finite_pairs = [value for value in pairs.values() if not math.isnan(value)]
    return EpsilonBounds(pairs, delta, max(finite_pairs + [delta]))


def change_probability(frequencies: Dict[HistoryLabel, float], initial_outcome: Optional[int] = None) -> float:
    """Total probability of histories whose outcome changes between consecutive times.

    With ``initial_outcome`` the outcome at the first time is also compared with it, which makes this the
    probability of at least one flip away from a known initial record.
    """
    total = 0.0
    for label, p in frequencies.items():
        outcomes = ((initial_outcome,) if initial_outcome is not None else ()) + tuple(label)
        if any(a != b for a, b in zip(outcomes, outcomes[1:])):
            total += p
    return total


@dataclass(frozen=True)
class ConsistencyReport:
    """Probabilities and approximate-consistency bounds of one family"""
    retained: List[RetainedHistory]
    remainder_probability: float
    n_readout: int
    threshold_count: float
    epsilon_pairs: Dict[Tuple[HistoryLabel, HistoryLabel], float]
    delta: float
    epsilon_bound: float
    cost_at_solution: CostValue
    change_probability: float
    high_entropy: bool

    def to_dict(self) -> dict:
        """JSON-ready dictionary. Non-finite floats are left for the serializer to map."""
        return {
            "retained": [{"label": str(h.label), "probability": h.probability, "count": h.count}
                         for h in self.retained],
            "remainder_probability": self.remainder_probability,
            "n_readout": self.n_readout,
            "threshold_count": self.threshold_count,
            "epsilon_pairs": [{"a": str(a), "b": str(b), "epsilon": value}
                              for (a, b), value in self.epsilon_pairs.items()],
            "delta": self.delta,
            "epsilon_bound": self.epsilon_bound,
            "change_probability": self.change_probability,
            "high_entropy": self.high_entropy,
            "cost": self.cost_at_solution.to_dict(),
        }


def consistency_report(state: BranchedState, n_readout: int, eps_max: float, plan: ShotPlan = ShotPlan(),
                       mode: ThresholdMode = ThresholdMode.POISSON,
                       initial_outcome: Optional[int] = None) -> ConsistencyReport:
    """Full-trace cost, readout and bound chain of a branched state"""
    full_cost = cost_from_state(state, CostMode.FULL, plan if plan.exact else plan.derive(0))
    readout = probability_readout(state, n_readout, eps_max, plan if plan.exact else plan.derive(1), mode)
    bounds = epsilon_bounds(full_cost.c, readout.retained, readout.remainder_probability)
    high_entropy = not readout.retained
    if high_entropy:
        logger.warning(f"No history reached {readout.threshold_count:g} counts in {n_readout} readout shots: "
                       f"family too high-entropy for this budget.")
    return ConsistencyReport(readout.retained, readout.remainder_probability, readout.n_readout,
                             readout.threshold_count, bounds.pairs, bounds.delta, bounds.bound, full_cost,
                             change_probability(readout.frequencies, initial_outcome), high_entropy)


def partial_trace_handoff(model: ModelSpec, family: FamilySpec, n_readout: int, eps_max: float,
                          plan: ShotPlan = ShotPlan(), mode: ThresholdMode = ThresholdMode.POISSON,
                          initial_outcome: Optional[int] = None) -> ConsistencyReport:
    """Report on a family found with the partial-trace cost, using the full-trace cost and probabilities.

    Parameters
    ----------
    model : ModelSpec
        Initial state and dynamics
    family : FamilySpec
        Family at the minimum
    n_readout : int
        Readout shots
    eps_max : float
        Target relative precision of retained probabilities
    plan : ShotPlan
        Exact or sampled evaluation of the full-trace cost and readout
    mode : ThresholdMode
        Retention threshold rule
    initial_outcome : int, Optional
        Outcome that labels the initial state, counted as the record before the first time

    Returns
    -------
    : ConsistencyReport
    """
    return consistency_report(build_branched_state(model, family), n_readout, eps_max, plan, mode, initial_outcome)
