"""Exact and shot-sampled purity primitives and decoherence functional element readout

Sampled estimates draw per-shot outcomes from their exact single-shot distributions:

* Swap test: parities +1/-1 with P(+1) = (1 + Tr(rho^2)) / 2.
* DIP test: match indicators with P(match) = sum_i p_i^2 over the dephasing-basis diagonal.
* PDIP test: no-match (0) or a matched block alpha with parity +1/-1, where P(match alpha) = p_alpha^2 and the
  conditional parity mean is Tr(M_alpha^2) / p_alpha^2.

Every call derives its own random generator from the plan seed and a call-site tag.
"""
# Standard
from dataclasses import dataclass, field
from enum import Enum
import logging
from typing import Dict, Optional, Tuple
import zlib
# Installed
import numpy as np
# Local
from consistent_histories import qmath
from consistent_histories.qmath import dephase
from consistent_histories.branchstate import BranchedState
from consistent_histories.exceptions import InvalidStateError
from consistent_histories.histories import HistoryLabel

logger = logging.getLogger(__name__)

STATE_ATOL = 1e-10


@dataclass(frozen=True)
class ShotPlan:
    """Shot budget and seed for sampled estimates.

    Parameters
    ----------
    shots : int, Optional
        Shots per estimate. None means exact evaluation.
    seed : int
        Nonnegative base seed of every random stream derived from this plan
    """
    shots: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.shots is not None and int(self.shots) < 1:
            raise ValueError(f"Shot count must be at least 1, got {self.shots}.")
        if int(self.seed) < 0:
            raise ValueError(f"Seed must be nonnegative, got {self.seed}.")

    @property
    def exact(self) -> bool:
        """True when no sampling happens"""
        return self.shots is None

    def rng(self, tag: str) -> np.random.Generator:
        """Independent generator for one call site"""
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), zlib.crc32(tag.encode())]))

    def derive(self, *keys: int) -> 'ShotPlan':
        """Plan with the same shot count and a seed derived from this plan's seed and integer keys"""
        entropy = [int(self.seed)] + [int(key) for key in keys]
        seed = int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])
        return ShotPlan(self.shots, seed)


class Primitive(Enum):
    """Two-copy measurement primitive behind a purity estimate"""
    SWAP = "swap"
    DIP = "dip"
    PDIP = "pdip"


@dataclass(frozen=True)
class PurityEstimate:
    """Estimated purity with its standard error (zero when exact)"""
    value: float
    stderr: float
    primitive: Primitive


@dataclass(frozen=True)
class ElementEstimate:
    """Estimated real or imaginary part of one decoherence functional element"""
    value: float
    stderr: float
    components: Dict[str, float] = field(default_factory=dict)


def _check_state(state: qmath.Operator):
    if not state.is_psd(STATE_ATOL):
        raise InvalidStateError(f"State {state} is not positive semi-definite within {STATE_ATOL}.")
    if not state.has_unit_trace(STATE_ATOL):
        raise InvalidStateError(f"State {state} has trace {state.trace()}, not 1 within {STATE_ATOL}.")


def _parity_mean(n_plus: int, n: int) -> Tuple[float, float]:
    """Mean and standard error of n draws of +/-1 with n_plus positive draws"""
    mean = (2 * n_plus - n) / n
    return mean, float(np.sqrt(max(1 - mean ** 2, 0.0) / n))


def purity(state: qmath.Operator, plan: ShotPlan, tag: str = "swap") -> PurityEstimate:
    """Tr(state^2), exactly or by a simulated Swap test.

    Parameters
    ----------
    state : qmath.Operator
        Density matrix
    plan : ShotPlan
        Shot budget and seed
    tag : str
        Call-site tag that selects the random stream

    Returns
    -------
    : PurityEstimate
    """
    _check_state(state)
    exact = state.purity()
    if plan.exact:
        return PurityEstimate(exact, 0.0, Primitive.SWAP)
    p_plus = min(max((1 + exact) / 2, 0.0), 1.0)
    n_plus = plan.rng(tag).binomial(plan.shots, p_plus)
    value, stderr = _parity_mean(n_plus, plan.shots)
    return PurityEstimate(value, stderr, Primitive.SWAP)


def _dephased_blocks(state: qmath.Operator, on: qmath.SubsystemSelector) -> Tuple[np.ndarray, np.ndarray]:
    """Traces p_alpha and purities Tr(M_alpha^2) of the blocks that survive dephasing on ``on``"""
    n = len(state.dims)
    rest = on.complement(n).indices
    order = on.indices + rest
    a_dim = int(np.prod([state.dims[i] for i in on.indices]))
    r_dim = state.side // a_dim
    tensor_form = state.data.reshape(state.dims + state.dims).transpose(order + tuple(n + i for i in order))
    tensor_form = tensor_form.reshape(a_dim, r_dim, a_dim, r_dim)
    blocks = tensor_form[np.arange(a_dim), :, np.arange(a_dim), :]
    traces = np.real(np.einsum('arr->a', blocks))
    block_purities = np.real(np.einsum('ars,asr->a', blocks, blocks))
    return traces, block_purities


def dephased_purity(state: qmath.Operator, on: qmath.SubsystemSelector, plan: ShotPlan,
                    tag: str = "dephased") -> PurityEstimate:
    """Tr(dephase(state, on)^2), exactly or by a simulated DIP (everything dephased) or PDIP test.

    Parameters
    ----------
    state : qmath.Operator
        Density matrix
    on : qmath.SubsystemSelector
        Subsystems that are dephased
    plan : ShotPlan
        Shot budget and seed
    tag : str
        Call-site tag that selects the random stream

    Returns
    -------
    : PurityEstimate
    """
    _check_state(state)
    on.validate(len(state.dims))
    full = len(on.indices) == len(state.dims)
    primitive = Primitive.DIP if full else Primitive.PDIP
    if plan.exact:
        return PurityEstimate(dephase(state, on).purity(), 0.0, primitive)

    rng = plan.rng(tag)
    n = plan.shots
    if full:
        p = np.clip(np.real(np.diagonal(state.data)), 0.0, None)
        q = min(float(np.sum(p ** 2)), 1.0)
        value = rng.binomial(n, q) / n
        return PurityEstimate(value, float(np.sqrt(value * (1 - value) / n)), primitive)

    traces, block_purities = _dephased_blocks(state, on)
    traces = np.clip(traces, 0.0, None)
    match = traces ** 2
    ratio = np.divide(block_purities, match, out=np.zeros_like(match), where=match > 0)
    ratio = np.clip(ratio, 0.0, 1.0)
    outcome_probabilities = np.concatenate([match * (1 + ratio) / 2, match * (1 - ratio) / 2])
    no_match = max(1.0 - float(outcome_probabilities.sum()), 0.0)
    outcome_probabilities = np.append(outcome_probabilities, no_match)
    counts = rng.multinomial(n, outcome_probabilities / outcome_probabilities.sum())
    n_plus = int(counts[:len(match)].sum())
    n_minus = int(counts[len(match):2 * len(match)].sum())
    value = (n_plus - n_minus) / n
    logger.debug(f"PDIP test over {len(match)} blocks: {n_plus} even and {n_minus} odd parities in {n} shots.")
    second_moment = (n_plus + n_minus) / n
    stderr = float(np.sqrt(max(second_moment - value ** 2, 0.0) / n))
    return PurityEstimate(value, stderr, primitive)


def _overlaps(state: BranchedState, a: HistoryLabel, b: HistoryLabel) -> Tuple[float, float, float]:
    """Average of D(a,a) and D(b,b), with the real and imaginary parts of D(a,b)"""
    i, j = state.label_index(a), state.label_index(b)
    sigma = state.sigma_a.data
    average = float(np.real(sigma[i, i] + sigma[j, j])) / 2
    off = sigma[i, j]
    return average, float(np.real(off)), float(np.imag(off))


def element_readout(state: BranchedState, a: HistoryLabel, b: HistoryLabel, part: str, plan: ShotPlan,
                    tag: str = "element") -> ElementEstimate:
    """Read out the real or imaginary part of D(a, b) with the controlled-superposition Swap test protocol.

    For a != b the control qubit selects the superposition (|a> + c|b>)/sqrt(2) or (|a> - c|b>)/sqrt(2), with
    c = 1 for the real part and c = i for the imaginary part, and each half of the shots is swap-tested against
    sigma^A. The real part is (R0 - R1)/2 and the imaginary part is (I1 - I0)/2. For a == b a single Swap test
    against |a><a| reads out D(a, a), whose imaginary part is zero.

    Parameters
    ----------
    state : BranchedState
        Branched state holding sigma^A
    a : HistoryLabel
        Row label
    b : HistoryLabel
        Column label
    part : str
        "real" or "imaginary"
    plan : ShotPlan
        Shot budget and seed
    tag : str
        Call-site tag that selects the random stream

    Returns
    -------
    : ElementEstimate
    """
    if part not in ("real", "imaginary"):
        raise ValueError(f"Element part must be 'real' or 'imaginary', got '{part}'.")
    a, b = HistoryLabel(a), HistoryLabel(b)
    average, real, imaginary = _overlaps(state, a, b)

    if a == b:
        if part == "imaginary":
            return ElementEstimate(0.0, 0.0, {})
        if plan.exact:
            return ElementEstimate(average, 0.0, {"P": average})
        n_plus = plan.rng(tag).binomial(plan.shots, min(max((1 + average) / 2, 0.0), 1.0))
        value, stderr = _parity_mean(n_plus, plan.shots)
        return ElementEstimate(value, stderr, {"P": value})

    if part == "real":
        names, exact = ("R0", "R1"), (average + real, average - real)
    else:
        names, exact = ("I0", "I1"), (average - imaginary, average + imaginary)

    if plan.exact:
        components = dict(zip(names, exact))
    else:
        if plan.shots < 2:
            raise ValueError("Off-diagonal element readout needs at least 2 shots.")
        rng = plan.rng(tag)
        n_zero = int(min(max(rng.binomial(plan.shots, 0.5), 1), plan.shots - 1))
        partitions = (n_zero, plan.shots - n_zero)
        estimates = []
        for n, overlap in zip(partitions, exact):
            n_plus = rng.binomial(n, min(max((1 + overlap) / 2, 0.0), 1.0))
            estimates.append(_parity_mean(n_plus, n))
        components = {name: mean for name, (mean, _) in zip(names, estimates)}
        stderr = 0.5 * float(np.sqrt(sum(err ** 2 for _, err in estimates)))

    if part == "real":
        value = (components["R0"] - components["R1"]) / 2
    else:
        value = (components["I1"] - components["I0"]) / 2
    return ElementEstimate(value, 0.0 if plan.exact else stderr, components)
