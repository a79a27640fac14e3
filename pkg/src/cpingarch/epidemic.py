"""
Thinning-based representation of the INGARCH models as an epidemic process.

Per time step ``t`` (fixed order, so runs are reproducible):

1. assemble the exposed pool ``E_t = sum_j L_{t-j,j} + sum_i C_{t-i,i}``;
2. split it, ``(L_{t,1..q}, A_t) ~ Mult(E_t; beta_1..beta_q, 1 - sum beta)``
   (for q = 1 this is ``L_t = beta o E_t``);
3. draw imports ``I_t ~ Pois(tau)``;
4. ``X_t = psi *_G (I_t + A_t)``;
5. contaminate, ``C_{t,i} = kappa_i * X_t``.

The initial pools ``E_m ~ Pois(eta_m)``, ``m = 1-q..0``, are split first, then
the fixed ``X_{1-p}..X_0`` contaminate. In the compound case the pool counts
clusters and ``G`` is only applied to clusters becoming infectious.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .classical import ClassicalParams, _vec
from .distributions import UNIT, SecondaryDistribution, SumSampler, TruncatedPMF
from .errors import ParameterError, RepresentationError
from .thinning import binomial_thin, compound_thin, multinomial_split, poisson_thin

__all__ = [
    "EpidemicPath",
    "iter_counts",
    "ThinningParams",
    "latent_period_pmf",
    "map_to_classical",
    "map_to_thinning",
    "pool_occupancy",
    "simulate_thinning",
]


@dataclass(frozen=True)
class ThinningParams:
    """
    Parameters of the thinning representation.

    ``eta`` holds the initial pool rates ``eta_{1-q}, ..., eta_0`` and
    ``x_init`` the counts ``X_{1-p}, ..., X_0``, both in time order.
    A non-unit ``G`` is only defined for order (1, 1).
    """

    tau: float
    kappa: tuple[float, ...]
    beta: tuple[float, ...]
    eta: tuple[float, ...]
    x_init: tuple[int, ...] | None = None
    G: SecondaryDistribution = UNIT

    def __post_init__(self):
        kappa = _vec(self.kappa, "kappa")
        beta = _vec(self.beta, "beta")
        eta = _vec(self.eta, "eta")
        tau = float(self.tau)
        if not tau > 0:
            raise ParameterError(f"tau must be > 0, got {tau}")
        if any(not k > 0 for k in kappa):
            raise ParameterError(f"every kappa_i must be > 0, got {kappa}")
        if any(b < 0 for b in beta) or sum(beta) >= 1.0:
            raise ParameterError(f"need beta_j >= 0 and sum(beta) < 1, got {beta}")
        if len(eta) != len(beta):
            raise ParameterError(f"eta needs q={len(beta)} values, got {len(eta)}")
        if any(not e > 0 for e in eta):
            raise ParameterError(f"every eta_m must be > 0, got {eta}")
        x0 = (0,) * len(kappa) if self.x_init is None else self.x_init
        x0 = tuple(int(x) for x in np.atleast_1d(x0))
        if len(x0) != len(kappa) or any(x < 0 for x in x0):
            raise ParameterError(f"x_init needs p={len(kappa)} nonnegative counts, got {x0}")
        if not isinstance(self.G, SecondaryDistribution):
            raise ParameterError("G must be a SecondaryDistribution")
        if self.G.kind != "unit" and (len(kappa), len(beta)) != (1, 1):
            raise ParameterError("compound (non-unit) G is only supported for order (1, 1)")
        for name, value in (("tau", tau), ("kappa", kappa), ("beta", beta),
                            ("eta", eta), ("x_init", x0)):
            object.__setattr__(self, name, value)

    @classmethod
    def ingarch11(cls, tau, kappa, beta, eta, x0=0, G=UNIT) -> ThinningParams:
        return cls(tau, (kappa,), (beta,), (eta,), (x0,), G)

    @property
    def p(self) -> int:
        return len(self.kappa)

    @property
    def q(self) -> int:
        return len(self.beta)

    def to_dict(self) -> dict:
        return {
            "formulation": "thinning",
            "order": {"p": self.p, "q": self.q},
            "tau": self.tau,
            "kappa": list(self.kappa),
            "beta": list(self.beta),
            "eta": list(self.eta),
            "x_init": list(self.x_init),
            "distribution": self.G.to_config(),
        }


@dataclass(frozen=True)
class EpidemicPath:
    """
    Simulated thinning trajectory for ``t = 1..T``.

    ``l`` has a trailing axis of length q and ``c`` one of length p. With
    latent tracking, ``latent`` holds rows ``(entry_time, exit_time, count)``
    for every group of pool members leaving the pool together; members of the
    initial pools carry entry times ``<= 0`` and members still in the pool
    after ``T`` carry exit time ``-1``.
    """

    i: np.ndarray
    e: np.ndarray
    l: np.ndarray
    a: np.ndarray
    c: np.ndarray
    x: np.ndarray
    latent: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.x.shape[-1]


def _contaminate(kappa, x, rng):
    if len(kappa) == 1:
        return np.asarray(poisson_thin(kappa[0], x, rng))[..., None]
    return np.stack([np.asarray(poisson_thin(k, x, rng)) for k in kappa], axis=-1)


def _split(beta, e, rng):
    if len(beta) == 1:
        stay = np.asarray(binomial_thin(beta[0], e, rng))
        return stay[..., None], e - stay
    return multinomial_split(e, beta, rng)


def simulate_thinning(
    params: ThinningParams,
    T: int,
    rng: np.random.Generator,
    reps: int | None = None,
    track_latent: bool = False,
) -> EpidemicPath:
    """
    Simulate ``T`` steps of the thinning representation.

    Parameters
    ----------
    params : ThinningParams
    T : int
        Number of steps, ``T >= 1``.
    rng : numpy.random.Generator
    reps : int, optional
        Simulate this many independent trajectories side by side.
    track_latent : bool
        Record pool entry and exit times. Only for single trajectories; pools
        are then split cohort by cohort, which consumes the random stream
        differently from an untracked run.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if track_latent:
        if reps is not None:
            raise ValueError("latent tracking is only available for single trajectories")
        return _simulate_tracked(params, T, rng)

    shape = () if reps is None else (int(reps),)
    p, q = params.p, params.q
    if p == q == 1:
        return _simulate11(params, T, rng, shape)
    H = max(p, q) + 1
    # arrivals[(t + h) % H] accumulates pool entries due at time t + h
    arrivals = np.zeros((H,) + shape, dtype=np.int64)

    e_init = rng.poisson(np.broadcast_to(np.asarray(params.eta), shape + (q,)))
    for k in range(q):
        m = k + 1 - q
        jumps, _ = _split(params.beta, e_init[..., k], rng)
        for j in range(1, q + 1):
            if m + j >= 1:
                arrivals[(m + j) % H] += jumps[..., j - 1]
    for k in range(p):
        m = k + 1 - p
        c0 = _contaminate(params.kappa, np.full(shape, params.x_init[k], dtype=np.int64), rng)
        for i in range(1, p + 1):
            if m + i >= 1:
                arrivals[(m + i) % H] += c0[..., i - 1]

    out_i = np.empty(shape + (T,), dtype=np.int64)
    out_e = np.empty_like(out_i)
    out_a = np.empty_like(out_i)
    out_x = np.empty_like(out_i)
    out_l = np.empty(shape + (T, q), dtype=np.int64)
    out_c = np.empty(shape + (T, p), dtype=np.int64)
    compound = SumSampler(params.G, rng)
    for t in range(1, T + 1):
        slot = t % H
        e_t = arrivals[slot].copy()
        arrivals[slot] = 0
        l_t, a_t = _split(params.beta, e_t, rng)
        assert np.array_equal(l_t.sum(-1) + a_t, e_t)
        i_t = rng.poisson(params.tau, shape)
        x_t = compound(i_t + a_t)
        c_t = _contaminate(params.kappa, x_t, rng)
        for j in range(q):
            arrivals[(t + j + 1) % H] += l_t[..., j]
        for i in range(p):
            arrivals[(t + i + 1) % H] += c_t[..., i]
        out_i[..., t - 1] = i_t
        out_e[..., t - 1] = e_t
        out_a[..., t - 1] = a_t
        out_x[..., t - 1] = x_t
        out_l[..., t - 1, :] = l_t
        out_c[..., t - 1, :] = c_t
    return EpidemicPath(out_i, out_e, out_l, out_a, out_c, out_x)


def _chunks11(params: ThinningParams, T: int, rng: np.random.Generator, shape, chunk: int):
    """Order (1, 1) stepping in blocks of ``chunk`` steps; same draw order as the general loop."""
    tau, kappa, beta, G = params.tau, params.kappa[0], params.beta[0], params.G
    unit = G.kind == "unit"
    compound = SumSampler(G, rng)
    e0 = rng.poisson(np.broadcast_to(params.eta[0], shape))
    e = rng.binomial(e0, beta)
    e = e + rng.poisson(kappa * np.full(shape, params.x_init[0], dtype=np.int64))
    for start in range(0, T, chunk):
        n = min(chunk, T - start)
        out = np.empty((6,) + shape + (n,), dtype=np.int64)
        out_i, out_e, out_l, out_a, out_c, out_x = out
        for t in range(n):
            l_t = rng.binomial(e, beta)
            a_t = e - l_t
            i_t = rng.poisson(tau, shape)
            x_t = i_t + a_t if unit else compound(i_t + a_t)
            c_t = rng.poisson(kappa * x_t)
            out_i[..., t] = i_t
            out_e[..., t] = e
            out_l[..., t] = l_t
            out_a[..., t] = a_t
            out_c[..., t] = c_t
            out_x[..., t] = x_t
            e = l_t + c_t
        assert np.array_equal(out_l + out_a, out_e)
        yield out


def _simulate11(params: ThinningParams, T: int, rng: np.random.Generator, shape) -> EpidemicPath:
    (out,) = _chunks11(params, T, rng, shape, T)
    out_i, out_e, out_l, out_a, out_c, out_x = out
    return EpidemicPath(out_i, out_e, out_l[..., None], out_a, out_c[..., None], out_x)


def iter_counts(
    params: ThinningParams,
    T: int,
    rng: np.random.Generator,
    reps: int | None = None,
    chunk: int = 1 << 15,
):
    """
    Yield the counts ``X_1..X_T`` of an order (1, 1) run in blocks of ``chunk`` steps.

    The draws are those of :func:`simulate_thinning` with the same generator,
    so concatenating the blocks reproduces ``simulate_thinning(...).x``. Use
    this for long runs whose full state would not fit in memory.
    """
    if (params.p, params.q) != (1, 1):
        raise ParameterError("iter_counts is only available for order (1, 1)")
    if T < 1:
        raise ValueError("T must be >= 1")
    shape = () if reps is None else (int(reps),)
    for out in _chunks11(params, T, rng, shape, int(chunk)):
        yield out[5]


def _simulate_tracked(params: ThinningParams, T: int, rng: np.random.Generator) -> EpidemicPath:
    p, q = params.p, params.q
    # pending[time][entry_time] = members due in the pool at `time`
    pending: defaultdict[int, defaultdict[int, int]] = defaultdict(lambda: defaultdict(int))
    for k in range(q):
        m = k + 1 - q
        n = int(rng.poisson(params.eta[k]))
        jumps, _ = multinomial_split(n, params.beta, rng)
        for j in range(1, q + 1):
            if m + j >= 1 and jumps[j - 1]:
                pending[m + j][m] += int(jumps[j - 1])
    for k in range(p):
        m = k + 1 - p
        for i in range(1, p + 1):
            if m + i >= 1:
                c = int(poisson_thin(params.kappa[i - 1], params.x_init[k], rng))
                if c:
                    pending[m + i][m + i] += c

    records = []
    cols = {name: np.zeros(T, dtype=np.int64) for name in ("i", "e", "a", "x")}
    out_l = np.zeros((T, q), dtype=np.int64)
    out_c = np.zeros((T, p), dtype=np.int64)
    for t in range(1, T + 1):
        pool = pending.pop(t, {})
        e_t = a_t = 0
        l_t = np.zeros(q, dtype=np.int64)
        for entry in sorted(pool):
            n = pool[entry]
            jumps, exits = multinomial_split(n, params.beta, rng)
            e_t += n
            a_t += int(exits)
            l_t += jumps
            if exits:
                records.append((entry, t, int(exits)))
            for j in range(1, q + 1):
                if jumps[j - 1]:
                    pending[t + j][entry] += int(jumps[j - 1])
        i_t = int(rng.poisson(params.tau))
        x_t = int(compound_thin(params.G, i_t + a_t, rng))
        c_t = np.array([poisson_thin(k, x_t, rng) for k in params.kappa], dtype=np.int64)
        for i in range(1, p + 1):
            if c_t[i - 1]:
                pending[t + i][t + i] += int(c_t[i - 1])
        cols["i"][t - 1], cols["e"][t - 1], cols["a"][t - 1], cols["x"][t - 1] = i_t, e_t, a_t, x_t
        out_l[t - 1] = l_t
        out_c[t - 1] = c_t
    # members still in the pool after T are censored; exit time -1
    for due in sorted(pending):
        for entry in sorted(pending[due]):
            records.append((entry, -1, pending[due][entry]))
    latent = np.array(records, dtype=np.int64).reshape(-1, 3)
    return EpidemicPath(cols["i"], cols["e"], out_l, cols["a"], out_c, cols["x"], latent)


def map_to_classical(params: ThinningParams) -> ClassicalParams:
    """
    Classical parameters of the same process.

    ``nu = mu (1 - B) tau``, ``alpha_i = mu (1 - B) kappa_i`` and
    ``lambda_m = mu (tau + (1 - B) eta_m)`` with ``B = sum(beta)`` and ``mu``
    the mean of ``G`` (1 for the Poisson models).
    """
    mu = params.G.mean
    s = 1.0 - sum(params.beta)
    return ClassicalParams(
        nu=mu * s * params.tau,
        alpha=tuple(mu * s * k for k in params.kappa),
        beta=params.beta,
        G=params.G,
        lambda_init=tuple(mu * (params.tau + s * e) for e in params.eta),
        x_init=params.x_init,
    )


def map_to_thinning(params: ClassicalParams) -> ThinningParams:
    """
    Inverse of :func:`map_to_classical`.

    Raises
    ------
    RepresentationError
        If some initial ``lambda_m`` is too small to give ``eta_m > 0``;
        ``lambda_m >= nu`` alone does not ensure ``lambda_m / mu > tau``.
    """
    if params.G.kind != "unit" and (params.p, params.q) != (1, 1):
        raise ParameterError("compound (non-unit) G is only supported for order (1, 1)")
    mu = params.G.mean
    s = 1.0 - sum(params.beta)
    tau = params.nu / (mu * s)
    eta = tuple((lam / mu - tau) / s for lam in params.lambda_init)
    for m, e in zip(range(1 - params.q, 1), eta):
        if e <= 1e-12 * max(1.0, tau):
            raise RepresentationError(
                f"lambda_{m} = {params.lambda_init[m + params.q - 1]:g} gives eta_{m} = {e:g}; "
                "the thinning representation requires eta > 0, i.e. lambda_m / mu > tau"
            )
    return ThinningParams(
        tau=tau,
        kappa=tuple(a / (mu * s) for a in params.alpha),
        beta=params.beta,
        eta=eta,
        x_init=params.x_init,
        G=params.G,
    )


def pool_occupancy(beta, jmax: int) -> np.ndarray:
    """``pi_0..pi_jmax``: probability that a pool entrant is in the pool ``j`` steps later."""
    b = _vec(beta, "beta")
    pi = np.zeros(jmax + 1)
    pi[0] = 1.0
    for j in range(1, jmax + 1):
        pi[j] = sum(b[l - 1] * pi[j - l] for l in range(1, len(b) + 1) if j - l >= 0)
    return pi


def latent_period_pmf(beta, jmax: int) -> TruncatedPMF:
    """
    Pmf of the latent period on ``0..jmax`` (entry 0 is always 0).

    A period of ``j`` means the member leaves the pool ``j - 1`` steps after
    entering it: ``P(j) = (1 - sum beta) * pi_{j-1}``. For q = 1 this is the
    geometric law ``beta**(j-1) (1 - beta)``.
    """
    if jmax < 1:
        raise ValueError("jmax must be >= 1")
    b = _vec(beta, "beta")
    if any(x < 0 for x in b) or sum(b) >= 1:
        raise ParameterError(f"need beta_j >= 0 and sum(beta) < 1, got {b}")
    pi = pool_occupancy(b, jmax - 1)
    probs = np.concatenate(([0.0], (1.0 - math.fsum(b)) * pi))
    return TruncatedPMF.from_probs(probs)
