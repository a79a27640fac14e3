import math
import warnings

import numpy as np
import pytest
from scipy import stats

from cpingarch.branching import ImmigrationLaw, OffspringLaw, immigration_pmf, simulate_branching
from cpingarch.classical import conditional_pmf_x
from cpingarch.distributions import UNIT, SecondaryDistribution
from cpingarch.epidemic import ThinningParams
from cpingarch.errors import NonConvergenceWarning, RefusalError
from cpingarch.stationary import (
    StationarySettings,
    e_kernel,
    e_stationary,
    e_transition_row,
    inarch1_stationary,
    x_given_e_pmf,
    x_stationary,
)

DEMO = ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0)
SET = StationarySettings()


def test_row_zero_is_immigration():
    row = e_transition_row(0, DEMO, 100, 1e-12)
    imm = immigration_pmf(ImmigrationLaw.from_params(DEMO), 100, 1e-12)
    assert np.allclose(row.probs, imm.probs, rtol=0, atol=1e-16)


def test_row_one_frozen_value():
    tp = ThinningParams.ingarch11(2.0, 0.5, 0.0, 1.0)
    # Pois(0.5)(0) times the Poisson-stopped Pois(0.5) sum at 0, by double summation
    assert e_transition_row(1, tp, 100, 1e-12).probs[0] == pytest.approx(0.27611476607686206, rel=1e-12)


@pytest.mark.parametrize("G", [UNIT, SecondaryDistribution("borel", 0.4)], ids=str)
def test_kernel_rows_are_subprobabilities(G):
    tp = ThinningParams.ingarch11(1.0, 0.4, 0.3, 1.0, G=G)
    K = e_kernel(tp, 120, 1e-12)
    sums = K.sum(axis=1)
    assert np.all(K >= 0) and np.all(sums <= 1 + 1e-12)
    # light rows lose at most eps; heavy rows may lose real mass beyond M
    assert np.all(1 - sums[:20] <= 1e-12)
    p = np.full(121, 1 / 121)
    for _ in range(5):
        new = p @ K
        assert new.sum() <= p.sum() + 1e-15
        p = new


def test_strict_row_raises_on_heavy_rows():
    from cpingarch.errors import TruncationError

    with pytest.raises(TruncationError):
        e_transition_row(100, DEMO, 60, 1e-12)
    assert e_transition_row(100, DEMO, 60, 1e-12, strict=False).deficit > 1e-3


def test_no_contagion_limit():
    tp = ThinningParams.ingarch11(2.0, 1e-8, 0.3, 1.0)
    res = x_stationary(tp, SET)
    assert res.p_e.probs[0] > 0.999
    assert res.p_x.tv(stats.poisson.pmf(np.arange(SET.M + 1), 2.0)) < 1e-3


def test_pool_law_matches_branching_simulation():
    tp = ThinningParams.ingarch11(2.0, 0.5, 0.0, 1.0)
    p_e = e_stationary(tp, SET)
    off, imm = OffspringLaw.from_params(tp), ImmigrationLaw.from_params(tp)
    path = simulate_branching(2, off, imm, 100_000 + 1000, np.random.default_rng(17), reps=100)
    hist = np.bincount(path[:, 1001:].ravel()) / path[:, 1001:].size
    assert p_e.tv(hist) <= 0.01


def test_initialisation_independence():
    a = e_stationary(DEMO, SET, start=0)
    b = e_stationary(DEMO, SET, start=min(10, SET.M))
    assert a.tv(b) <= 2 * SET.tol


def test_approximate_stationarity():
    p_e = e_stationary(DEMO, SET)
    K = e_kernel(DEMO, SET.M, SET.eps)
    assert p_e.tv(p_e.probs @ K) <= SET.tol + 10 * p_e.deficit + 1e-15


def test_x_given_e_examples():
    pois = stats.poisson.pmf(np.arange(41), 2.0)
    assert np.max(np.abs(x_given_e_pmf(0, DEMO, 40, 1e-12).probs - pois)) <= 1e-12
    other = ThinningParams.ingarch11(2.0, 0.5, 0.8, 1.0)
    assert np.allclose(x_given_e_pmf(0, other, 40, 1e-12).probs, x_given_e_pmf(0, DEMO, 40, 1e-12).probs)
    tp = ThinningParams.ingarch11(1.0, 0.5, 0.3, 1.0)
    out = x_given_e_pmf(2, tp, 40, 1e-12).probs
    # enumerated over a in {0, 1, 2} and i >= 0
    assert out[0] == pytest.approx(0.03310914970542981, rel=1e-12)
    assert out[1] == pytest.approx(0.18761851499743558, rel=1e-12)


def test_x_given_e_compound_mean():
    G = SecondaryDistribution("logarithmic", 0.3)
    tp = ThinningParams.ingarch11(1.0, 0.5, 0.3, 1.0, G=G)
    out = x_given_e_pmf(4, tp, 120, 1e-12)
    assert out.mean() == pytest.approx(G.mean * (1.0 + 4 * 0.7), rel=1e-9)


def test_refusals():
    sup = ThinningParams.ingarch11(2.0, 1.05, 0.3, 1.0)
    with pytest.raises(RefusalError):
        e_stationary(sup)
    with pytest.raises(RefusalError):
        x_stationary(sup)
    with pytest.raises(RefusalError):
        inarch1_stationary(1.0, 1.0, UNIT)


def test_inarch1_examples():
    near_iid = inarch1_stationary(1.0, 1e-9, UNIT, SET)
    assert near_iid.tv(conditional_pmf_x(1.0, UNIT, SET.M, 1e-12)) < 1e-8
    assert inarch1_stationary(1.0, 0.5, UNIT, SET).mean() == pytest.approx(2.0, rel=1e-3)


def test_cross_method_beta_zero():
    for G in (UNIT, SecondaryDistribution("poisson", 1.5)):
        tp = ThinningParams.ingarch11(1.0, 0.4, 0.0, 1.0, G=G)
        via_pool = x_stationary(tp, SET).p_x
        direct = inarch1_stationary(G.mean * tp.tau, G.mean * tp.kappa[0], G, SET)
        assert via_pool.tv(direct) <= 1e-6


def test_non_convergence_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = x_stationary(DEMO, StationarySettings(T=3))
    assert not res.converged and res.iterations_used == 3
    assert any(issubclass(w.category, NonConvergenceWarning) for w in caught)


def test_renormalize_flag():
    res = x_stationary(DEMO, SET, renormalize=True)
    assert res.p_x.deficit == 0.0 and math.isclose(res.p_x.probs.sum(), 1.0, abs_tol=1e-15)
    raw = x_stationary(DEMO, SET)
    assert raw.p_x.deficit > 0


def test_settings_validate():
    with pytest.raises(ValueError):
        StationarySettings(M=0)
    assert StationarySettings().to_dict() == {"M": 200, "T": 100_000, "tol": 1e-10, "eps": 1e-12}
