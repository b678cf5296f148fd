"""Tests for the property suites and their ability to catch broken routes"""
# Installed
import pytest
from scipy.linalg import dft
# Local
from consistent_histories import branchstate
from consistent_histories import estimators
from consistent_histories import qmath
from consistent_histories import verification
from consistent_histories.exceptions import VerificationError


def _fourier_dephase(m, on):
    """Dephase in the Fourier basis of the selected subsystems instead of the computational basis"""
    factors = [qmath.Operator((d,), dft(d, scale="sqrtn") if i in on.indices else qmath.identity((d,)).data)
               for i, d in enumerate(m.dims)]
    f = qmath.Operator(m.dims, qmath.tensor_all(factors).data)
    rotated = qmath.dephase(f @ m @ f.dag(), on)
    return f.dag() @ rotated @ f


def test_corpus_covers_every_size():
    sizes = {verification.corpus_parameters(index) for index in range(36)}
    assert len(sizes) == 36
    assert all(2 <= dims[0] <= 4 and 1 <= dims[1] <= 4 and 1 <= k <= 3 for dims, k in sizes)


def test_corpus_is_seeded():
    first = list(verification.random_corpus(3, seed=2))
    second = list(verification.random_corpus(3, seed=2))
    assert all(a[0] == b[0] and a[1] == b[1] for a, b in zip(first, second))


def test_suites_pass():
    results = verification.verify(n_models=12, seed=1)
    assert [result.name for result in results] == ["route-equivalence", "cost-identities", "completeness"]
    for result in results:
        assert result.passed
        assert result.cases == 12
        assert result.max_violation <= verification.DEFAULT_TOLERANCE


def test_broken_segment_is_caught(monkeypatch):
    apply_segment = branchstate._apply_segment
    monkeypatch.setattr(branchstate, "_apply_segment",
                        lambda linear_map, unitary, s_dim, e_dim: apply_segment(linear_map, unitary.dag(),
                                                                                 s_dim, e_dim))
    with pytest.raises(VerificationError) as excinfo:
        verification.verify(n_models=12)
    assert excinfo.value.invariant == "route-equivalence"


def test_broken_dephasing_is_caught(monkeypatch):
    monkeypatch.setattr(estimators, "dephase", _fourier_dephase)
    results = verification.run_suites(n_models=12)
    assert [result.passed for result in results] == [True, False, True]
    with pytest.raises(VerificationError) as excinfo:
        verification.verify(n_models=12)
    assert excinfo.value.invariant == "cost-identities"
