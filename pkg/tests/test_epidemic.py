import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpingarch.classical import ClassicalParams
from cpingarch.distributions import UNIT, SecondaryDistribution
from cpingarch.epidemic import (
    ThinningParams,
    iter_counts,
    latent_period_pmf,
    map_to_classical,
    map_to_thinning,
    pool_occupancy,
    simulate_thinning,
)
from cpingarch.errors import ParameterError, RepresentationError
from stat_helpers import within_se

DEMO = ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0)
PQ = ThinningParams(1.0, (0.4, 0.1), (0.2, 0.3), (1.0, 2.0), (1, 2))


def test_mapping_example():
    cp = map_to_classical(DEMO)
    assert cp.nu == pytest.approx(1.4)
    assert cp.alpha == pytest.approx((0.35,))
    assert cp.beta == (0.3,)
    assert cp.lambda_init == pytest.approx((2.7,))


def test_mapping_compound():
    G = SecondaryDistribution("borel", 0.5)  # mu = 2
    cp = map_to_classical(ThinningParams.ingarch11(1.0, 0.25, 0.5, 2.0, G=G))
    assert cp.nu == pytest.approx(2 * 0.5 * 1.0)
    assert cp.alpha == pytest.approx((2 * 0.5 * 0.25,))
    assert cp.lambda_init == pytest.approx((2 * (1.0 + 0.5 * 2.0),))


def test_mapping_pq():
    cp = map_to_classical(PQ)
    assert cp.nu == pytest.approx(0.5)
    assert cp.alpha == pytest.approx((0.2, 0.05))
    assert cp.lambda_init == pytest.approx((1.5, 2.0))


def test_boundary_eta_refused():
    with pytest.raises(RepresentationError, match="eta > 0"):
        map_to_thinning(ClassicalParams.ingarch11(1.4, 0.35, 0.3, lambda0=2.0))


@settings(max_examples=60, deadline=None)
@given(
    tau=st.floats(0.1, 10),
    kappa=st.lists(st.floats(0.01, 2), min_size=1, max_size=3),
    beta=st.lists(st.floats(0.0, 0.3), min_size=1, max_size=3),
    data=st.data(),
)
def test_round_trip(tau, kappa, beta, data):
    eta = data.draw(st.lists(st.floats(0.01, 10), min_size=len(beta), max_size=len(beta)))
    tp = ThinningParams(tau, kappa, beta, eta)
    back = map_to_thinning(map_to_classical(tp))
    assert back.tau == pytest.approx(tp.tau, rel=1e-12)
    assert back.kappa == pytest.approx(tp.kappa, rel=1e-12)
    assert back.eta == pytest.approx(tp.eta, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize(
    "args",
    [
        (0.0, (0.5,), (0.3,), (1.0,)),
        (1.0, (0.0,), (0.3,), (1.0,)),
        (1.0, (0.5,), (0.7, 0.3), (1.0, 1.0)),
        (1.0, (0.5,), (0.3,), (0.0,)),
        (1.0, (0.5,), (0.3,), (1.0, 1.0)),
    ],
)
def test_invalid_thinning_params(args):
    with pytest.raises(ParameterError):
        ThinningParams(*args)


def test_compound_needs_order11():
    with pytest.raises(ParameterError):
        ThinningParams(1.0, (0.4, 0.1), (0.3,), (1.0,), G=SecondaryDistribution("borel", 0.3))


def test_pool_occupancy_hand_values():
    assert pool_occupancy((0.2, 0.3), 3) == pytest.approx([1.0, 0.2, 0.34, 0.128])


def test_latent_period_pmf_values():
    pmf = latent_period_pmf((0.2, 0.3), 5).probs
    assert pmf == pytest.approx([0.0, 0.5, 0.1, 0.17, 0.064, 0.0638])
    geo = latent_period_pmf((0.3,), 10).probs
    j = np.arange(1, 11)
    assert geo[1:] == pytest.approx(0.3 ** (j - 1) * 0.7)


@settings(max_examples=30, deadline=None)
@given(beta=st.lists(st.floats(0.0, 0.3), min_size=1, max_size=3))
def test_latent_period_sums_to_one(beta):
    assert latent_period_pmf(beta, 400).probs.sum() == pytest.approx(1.0, abs=1e-9)


def test_identities_order11():
    G = SecondaryDistribution("logarithmic", 0.4)
    path = simulate_thinning(ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0, G=G), 300, np.random.default_rng(1), reps=4)
    assert np.array_equal(path.l[..., 0] + path.a, path.e)
    assert np.array_equal(path.e[:, 1:], path.l[:, :-1, 0] + path.c[:, :-1, 0])
    # at least one cluster per infectious event
    assert np.all(path.x >= path.i + path.a)


def test_identities_unit():
    path = simulate_thinning(DEMO, 300, np.random.default_rng(2))
    assert np.array_equal(path.x, path.i + path.a)


def test_identities_pq():
    path = simulate_thinning(PQ, 200, np.random.default_rng(3), reps=3)
    assert np.array_equal(path.l.sum(-1) + path.a, path.e)
    assert np.array_equal(path.x, path.i + path.a)
    t = np.arange(2, 200)
    # E_t = L_{t-1,1} + L_{t-2,2} + C_{t-1,1} + C_{t-2,2}
    rhs = path.l[:, t - 1, 0] + path.l[:, t - 2, 1] + path.c[:, t - 1, 0] + path.c[:, t - 2, 1]
    assert np.array_equal(path.e[:, t], rhs)


def test_iter_counts_reproduces_simulation():
    tp = ThinningParams.ingarch11(1.0, 0.4, 0.2, 1.0, G=SecondaryDistribution("borel", 0.4))
    full = simulate_thinning(tp, 1000, np.random.default_rng(4), reps=3).x
    blocks = list(iter_counts(tp, 1000, np.random.default_rng(4), reps=3, chunk=128))
    assert len(blocks) == 8
    assert np.array_equal(np.concatenate(blocks, axis=-1), full)
    with pytest.raises(ParameterError):
        next(iter_counts(PQ, 10, np.random.default_rng(0)))


def test_first_step_mean_is_lambda1():
    tp = ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0, x0=3)
    x1 = simulate_thinning(tp, 1, np.random.default_rng(5), reps=10**5).x[:, 0]
    cp = map_to_classical(tp)
    assert within_se(x1, cp.nu + cp.alpha[0] * 3 + cp.beta[0] * cp.lambda_init[0])


def test_tracked_latent_bookkeeping():
    path = simulate_thinning(PQ, 500, np.random.default_rng(6), track_latent=True)
    rows = path.latent
    exited = rows[rows[:, 1] >= 0]
    # exits recorded at time t add up to A_t
    a = np.bincount(exited[:, 1], weights=exited[:, 2], minlength=501)[1:]
    assert np.array_equal(a.astype(np.int64), path.a)
    assert np.all(exited[:, 1] >= exited[:, 0])
    with pytest.raises(ValueError):
        simulate_thinning(PQ, 10, np.random.default_rng(0), reps=2, track_latent=True)


def test_unit_default_distribution():
    assert DEMO.G == UNIT and DEMO.x_init == (0,)
