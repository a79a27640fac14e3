"""
Classical (conditional-distribution) INGARCH models.

The compound Poisson INGARCH(p, q) process is

    N_t | past ~ Pois(lambda_t / mu),   X_t = Z_1 + ... + Z_{N_t},  Z_i ~ G,
    lambda_t = nu + sum_i alpha_i X_{t-i} + sum_j beta_j lambda_{t-j},

with ``mu`` the mean of ``G``. With ``G`` the unit law this is the Poisson
INGARCH(p, q) model (``N_t = X_t``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _compound
from .distributions import UNIT, SecondaryDistribution, SumSampler, TruncatedPMF
from .errors import ParameterError

__all__ = [
    "ClassicalParams",
    "ClassicalPath",
    "ClassicalState",
    "conditional_pmf_x",
    "lambda_next",
    "simulate_classical",
    "stationary_mean",
]


def _vec(v, name) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError(f"{name} must be a non-empty vector")
    return tuple(float(a) for a in arr)


@dataclass(frozen=True)
class ClassicalParams:
    """
    Parameters of the classical CP-INGARCH(p, q) model.

    ``lambda_init`` holds ``lambda_{1-q}, ..., lambda_0`` and ``x_init`` holds
    ``X_{1-p}, ..., X_0``, both in time order. They default to ``nu`` and 0.
    """

    nu: float
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    G: SecondaryDistribution = UNIT
    lambda_init: tuple[float, ...] | None = None
    x_init: tuple[int, ...] | None = None

    def __post_init__(self):
        alpha = _vec(self.alpha, "alpha")
        beta = _vec(self.beta, "beta")
        nu = float(self.nu)
        if not nu > 0:
            raise ParameterError(f"nu must be > 0, got {nu}")
        if any(not a > 0 for a in alpha):
            raise ParameterError(
                f"every alpha_i must be > 0 (alpha_i = 0 is outside the thinning "
                f"representation), got {alpha}"
            )
        if any(b < 0 for b in beta) or sum(beta) >= 1.0:
            raise ParameterError(f"need beta_j >= 0 and sum(beta) < 1, got {beta}")
        lam = (nu,) * len(beta) if self.lambda_init is None else _vec(self.lambda_init, "lambda_init")
        x0 = (0,) * len(alpha) if self.x_init is None else self.x_init
        x0 = tuple(int(x) for x in np.atleast_1d(x0))
        if len(lam) != len(beta):
            raise ParameterError(f"lambda_init needs q={len(beta)} values, got {len(lam)}")
        if len(x0) != len(alpha):
            raise ParameterError(f"x_init needs p={len(alpha)} values, got {len(x0)}")
        if any(lm < nu * (1 - 1e-12) for lm in lam):
            raise ParameterError(f"initial lambdas must be >= nu={nu}, got {lam}")
        if any(x < 0 for x in x0):
            raise ParameterError("initial counts must be nonnegative")
        if not isinstance(self.G, SecondaryDistribution):
            raise ParameterError("G must be a SecondaryDistribution")
        for name, value in (("nu", nu), ("alpha", alpha), ("beta", beta),
                            ("lambda_init", lam), ("x_init", x0)):
            object.__setattr__(self, name, value)

    @classmethod
    def ingarch11(cls, nu, alpha, beta, lambda0=None, x0=0, G=UNIT) -> ClassicalParams:
        return cls(nu, (alpha,), (beta,), G, None if lambda0 is None else (lambda0,), (x0,))

    @property
    def p(self) -> int:
        return len(self.alpha)

    @property
    def q(self) -> int:
        return len(self.beta)

    def to_dict(self) -> dict:
        return {
            "formulation": "classical",
            "order": {"p": self.p, "q": self.q},
            "nu": self.nu,
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "lambda_init": list(self.lambda_init),
            "x_init": list(self.x_init),
            "distribution": self.G.to_config(),
        }


class ClassicalState(NamedTuple):
    t: int
    lambda_t: float
    x_t: int
    n_t: int


@dataclass(frozen=True)
class ClassicalPath:
    """Simulated trajectory for ``t = 1..T``; arrays carry a leading replicate axis if any."""

    lam: np.ndarray
    n: np.ndarray
    x: np.ndarray

    @property
    def T(self) -> int:
        return self.x.shape[-1]

    def states(self) -> Iterator[ClassicalState]:
        if self.x.ndim != 1:
            raise ValueError("states() is only defined for a single trajectory")
        for t in range(self.T):
            yield ClassicalState(t + 1, float(self.lam[t]), int(self.x[t]), int(self.n[t]))


def lambda_next(params: ClassicalParams, x_hist, lambda_hist):
    """
    Conditional mean for the next step.

    ``x_hist`` and ``lambda_hist`` are in time order (most recent last) along
    their last axis and must hold at least ``p`` and ``q`` values.
    """
    x = np.asarray(x_hist, dtype=float)
    lam = np.asarray(lambda_hist, dtype=float)
    if x.shape[-1:] < (params.p,) or lam.shape[-1:] < (params.q,) or x.ndim == 0 or lam.ndim == 0:
        raise ValueError(f"need at least p={params.p} counts and q={params.q} lambdas of history")
    out = (
        params.nu
        + x[..., ::-1][..., : params.p] @ np.asarray(params.alpha)
        + lam[..., ::-1][..., : params.q] @ np.asarray(params.beta)
    )
    return float(out) if np.ndim(out) == 0 else out


def simulate_classical(
    params: ClassicalParams, T: int, rng: np.random.Generator, reps: int | None = None
) -> ClassicalPath:
    """
    Simulate ``T`` steps of the classical model.

    Each step computes ``lambda_t``, draws ``N_t ~ Pois(lambda_t / mu)`` and
    compounds ``X_t = psi *_G N_t``. With ``reps`` given, that many independent
    trajectories are simulated side by side from the one generator.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    shape = () if reps is None else (int(reps),)
    p, q = params.p, params.q
    mu = params.G.mean
    unit = params.G.kind == "unit"
    x_buf = np.zeros(shape + (p + T,), dtype=np.int64)
    lam_buf = np.zeros(shape + (q + T,))
    x_buf[..., :p] = params.x_init
    lam_buf[..., :q] = params.lambda_init
    alpha = np.asarray(params.alpha)[::-1]
    beta = np.asarray(params.beta)[::-1]
    n_out = x_buf[..., p:] if unit else np.zeros(shape + (T,), dtype=np.int64)
    compound = SumSampler(params.G, rng)

    if p == 1 and q == 1:
        nu, a, b = params.nu, params.alpha[0], params.beta[0]
        x_prev = x_buf[..., 0].astype(float)
        lam_prev = lam_buf[..., 0]
        for t in range(T):
            lam_t = nu + a * x_prev + b * lam_prev
            n_t = rng.poisson(lam_t / mu)
            x_t = n_t if unit else compound(n_t)
            lam_buf[..., 1 + t] = lam_t
            x_buf[..., 1 + t] = x_t
            if not unit:
                n_out[..., t] = n_t
            x_prev, lam_prev = x_t, lam_t
    else:
        for t in range(T):
            lam_t = params.nu + x_buf[..., t : t + p] @ alpha + lam_buf[..., t : t + q] @ beta
            n_t = rng.poisson(lam_t / mu)
            x_t = n_t if unit else compound(n_t)
            lam_buf[..., q + t] = lam_t
            x_buf[..., p + t] = x_t
            if not unit:
                n_out[..., t] = n_t
    x = x_buf[..., p:]
    return ClassicalPath(lam_buf[..., q:], x if unit else n_out, x)


def conditional_pmf_x(lambda_t: float, G: SecondaryDistribution, M: int, eps: float) -> TruncatedPMF:
    """
    Conditional pmf of ``X_t`` given the past, truncated to ``0..M``.

    The compound Poisson law is built as a Poisson(lambda_t / mu) mixture of
    convolution powers of ``G``, cut where the Poisson tail falls below
    ``eps / 2``.

    Raises
    ------
    TruncationError
        If the total deficit exceeds ``eps``.
    """
    if not lambda_t > 0:
        raise ParameterError("lambda_t must be > 0")
    probs = _compound.compound_poisson_probs(lambda_t / G.mean, G, M, eps / 2)
    return TruncatedPMF.from_probs(probs).require(eps, "conditional pmf of X")


def conditional_pmf_matrix(lambdas, G: SecondaryDistribution, M: int, eps: float) -> np.ndarray:
    """Rows of truncated conditional pmfs for many ``lambda_t`` at once (no deficit check)."""
    lam = np.asarray(lambdas, dtype=float)
    return np.atleast_2d(_compound.compound_poisson_probs(lam / G.mean, G, M, eps / 2))


def stationary_mean(params: ClassicalParams) -> float:
    """``nu / (1 - sum(alpha) - sum(beta))``; infinite when that is not positive."""
    denom = 1.0 - sum(params.alpha) - sum(params.beta)
    return params.nu / denom if denom > 0 else float("inf")
