import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpingarch.distributions import (
    KINDS,
    UNIT,
    SecondaryDistribution,
    SumSampler,
    TruncatedPMF,
    has_finite_moment,
    moments,
    pmf,
    pmf_array,
    pmf_vector,
    sample,
    sample_sum,
    tail_support,
)
from cpingarch.errors import ParameterError, TruncationError
from stat_helpers import variance_within_se, within_se

LOG = lambda psi: SecondaryDistribution("logarithmic", psi)
POI = lambda psi: SecondaryDistribution("poisson", psi)
BOR = lambda psi: SecondaryDistribution("borel", psi)

# three psi values per kind for the moment and normalisation checks
GRID = [UNIT] + [LOG(p) for p in (0.1, 0.5, 0.9)] + [POI(p) for p in (0.5, 2.0, 6.0)] + [
    BOR(p) for p in (0.1, 0.4, 0.7)
]


def brute_moments(dist, tail=1e-14):
    """Mean and variance by direct summation of the pmf until the tail is negligible."""
    m1 = m2 = total = 0.0
    k = 0
    while True:
        p = pmf(dist, k)
        total += p
        m1 += k * p
        m2 += k * k * p
        k += 1
        if k > 5 and 1.0 - total < tail and p < tail:
            break
    return m1, m2 - m1 * m1


@pytest.mark.parametrize(
    "kind, psi",
    [("logarithmic", 0.0), ("logarithmic", 1.0), ("poisson", 0.0), ("poisson", -1.0),
     ("borel", 1.0), ("borel", -0.1), ("gamma", 0.5), ("poisson", math.nan)],
)
def test_invalid_parameters(kind, psi):
    with pytest.raises(ParameterError):
        SecondaryDistribution(kind, psi)


def test_unit_and_degenerate_borel_always_one(rng):
    assert np.all(sample(UNIT, rng, 1000) == 1)
    assert np.all(sample(BOR(0.0), rng, 1000) == 1)
    assert sample(UNIT, rng) == 1


def test_logarithmic_sample_mean(rng):
    # mean of Logarithmic(0.5) is 1 / ln 2
    draws = sample(LOG(0.5), rng, 10**5)
    assert within_se(draws, 1.4426950408889634, k=3)


def test_frozen_pmf_values():
    assert pmf(UNIT, 1) == 1.0 and pmf(UNIT, 0) == 0.0 and pmf(UNIT, 3) == 0.0
    assert pmf(BOR(0.3), 1) == pytest.approx(0.7408182206817179, rel=1e-14)
    assert pmf(LOG(0.5), 1) == pytest.approx(0.7213475204444817, rel=1e-14)
    assert pmf(BOR(0.0), 2) == 0.0


def test_frozen_moments():
    assert moments(UNIT) == (1.0, 0.0)
    assert moments(POI(2.0)) == (2.0, 2.0)
    assert moments(BOR(0.5)) == pytest.approx((2.0, 4.0), rel=1e-14)


@pytest.mark.parametrize("dist", GRID, ids=str)
def test_moments_match_pmf_summation(dist):
    assert moments(dist) == pytest.approx(brute_moments(dist), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("dist", GRID, ids=str)
def test_pmf_normalises(dist):
    M = tail_support(dist, 1e-11)
    assert 1.0 - math.fsum(pmf_array(dist, M)) < 1e-10


@pytest.mark.parametrize("dist", GRID, ids=str)
def test_sample_moments(dist):
    rng = np.random.default_rng([KINDS.index(dist.kind), int(dist.psi * 1000)])
    draws = sample(dist, rng, 10**5)
    mean, var = moments(dist)
    if var == 0:
        assert np.all(draws == mean)
        return
    assert within_se(draws, mean)
    assert variance_within_se(draws, var)


def test_pmf_vector_examples():
    assert np.array_equal(pmf_vector(UNIT, 3, 1e-12).probs, [0, 1, 0, 0])
    with pytest.raises(TruncationError) as err:
        pmf_vector(POI(1.0), 0, 0.01)
    assert err.value.deficit == pytest.approx(0.6321205588285577, rel=1e-12)
    v = pmf_vector(BOR(0.2), 50, 1e-10)
    assert v.deficit <= 1e-10
    assert np.allclose(v.probs, [pmf(BOR(0.2), k) for k in range(51)], rtol=0, atol=1e-14)


@pytest.mark.parametrize("dist", GRID, ids=str)
def test_pmf_vector_pointwise(dist):
    M = tail_support(dist, 1e-12)
    v = pmf_vector(dist, M, 1e-11)
    point = np.array([pmf(dist, k) for k in range(M + 1)])
    assert np.max(np.abs(v.probs - point)) <= 1e-14


def test_pmf_rejects_negative_k():
    with pytest.raises(ValueError):
        pmf(POI(1.0), -1)


def test_all_kinds_have_all_moments():
    for dist in GRID:
        assert all(has_finite_moment(dist, r) for r in range(1, 9))


def test_truncated_pmf_invariants():
    t = TruncatedPMF.from_probs([0.2, 0.3, 0.4])
    assert t.deficit == pytest.approx(0.1)
    assert math.fsum(t.probs) + t.deficit == pytest.approx(1.0, abs=1e-12)
    assert t.mean() == pytest.approx(1.1)
    assert t.renormalized().deficit == 0.0
    assert t.tv([0.2, 0.3, 0.4, 0.1]) == pytest.approx(0.05)
    with pytest.raises(TruncationError):
        t.require(0.05)
    with pytest.raises(ValueError):
        TruncatedPMF(np.array([0.5, -0.1]))


@pytest.mark.parametrize("dist", [LOG(0.3), POI(1.5), BOR(0.4), UNIT], ids=str)
def test_sum_sampler_matches_sample_sum(dist):
    # SumSampler is a buffered version of sample_sum; the laws must agree
    n = np.random.default_rng(1).integers(0, 6, size=20_000)
    a = SumSampler(dist, np.random.default_rng(2), batch=1000)(n)
    b = sample_sum(dist, n, np.random.default_rng(3))
    assert within_se(a - b, 0.0)
    assert np.all(a[n == 0] == 0)


def test_sum_sampler_deterministic():
    n = np.arange(50) % 4
    a = SumSampler(BOR(0.4), np.random.default_rng(5), batch=64)
    b = SumSampler(BOR(0.4), np.random.default_rng(5), batch=64)
    for _ in range(5):
        assert np.array_equal(a(n), b(n))


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["logarithmic", "poisson", "borel"]),
    psi=st.floats(0.01, 0.95),
    k=st.integers(0, 200),
)
def test_pmf_in_unit_interval(kind, psi, k):
    p = pmf(SecondaryDistribution(kind, psi), k)
    assert 0.0 <= p <= 1.0


@settings(max_examples=25, deadline=None)
@given(kind=st.sampled_from(["logarithmic", "poisson", "borel"]), psi=st.floats(0.05, 0.9))
def test_tail_support_bound(kind, psi):
    dist = SecondaryDistribution(kind, psi)
    M = tail_support(dist, 1e-10)
    assert 1.0 - math.fsum(pmf_array(dist, M)) <= 1e-10 + 1e-15
