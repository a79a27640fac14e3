"""
Galton-Watson-with-immigration view of the exposed-pool process.

For order (1, 1), every exposed cluster of ``E_{t-1}`` contributes

    B = 1                      with probability beta   (stays in the pool)
    B = kappa * (psi *_G 1)    with probability 1 - beta

clusters to ``E_t``, and imports add ``I* = kappa * (psi *_G I)`` with
``I ~ Pois(tau)``, so ``E_t = B_1 + ... + B_{E_{t-1}} + I*_t``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _compound
from .distributions import (
    SecondaryDistribution,
    SumSampler,
    TruncatedPMF,
    has_finite_moment,
    pmf_array,
    tail_support,
)
from .epidemic import ThinningParams
from .errors import ParameterError
from .thinning import binomial_thin, poisson_thin

__all__ = [
    "BranchingReport",
    "ImmigrationLaw",
    "OffspringLaw",
    "check_conditions",
    "immigration_pmf",
    "offspring_mean",
    "offspring_pmf",
    "simulate_branching",
]


@dataclass(frozen=True)
class OffspringLaw:
    beta: float
    kappa: float
    G: SecondaryDistribution

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ParameterError(f"need 0 <= beta < 1, got {self.beta}")
        if not self.kappa > 0:
            raise ParameterError(f"need kappa > 0, got {self.kappa}")

    @classmethod
    def from_params(cls, params: ThinningParams) -> OffspringLaw:
        _require_order11(params)
        return cls(params.beta[0], params.kappa[0], params.G)


@dataclass(frozen=True)
class ImmigrationLaw:
    tau: float
    kappa: float
    G: SecondaryDistribution

    def __post_init__(self):
        if not self.tau > 0:
            raise ParameterError(f"need tau > 0, got {self.tau}")
        if not self.kappa > 0:
            raise ParameterError(f"need kappa > 0, got {self.kappa}")

    @classmethod
    def from_params(cls, params: ThinningParams) -> ImmigrationLaw:
        _require_order11(params)
        return cls(params.tau, params.kappa[0], params.G)

    @property
    def mean(self) -> float:
        # Wald's identity through both compounding steps
        return self.kappa * self.G.mean * self.tau


@dataclass(frozen=True)
class BranchingReport:
    offspring_mean: float
    offspring_mean_lt_1: bool
    xlogx_finite: bool
    immigration_mean: float
    immigration_mean_finite: bool
    geometrically_ergodic: bool
    moment_order_checked: int
    moments_finite: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _require_order11(params: ThinningParams):
    if (params.p, params.q) != (1, 1):
        raise ParameterError("the branching reformulation is only available for order (1, 1)")


def offspring_mean(law: OffspringLaw) -> float:
    """``beta + (1 - beta) kappa mu``."""
    return law.beta + (1.0 - law.beta) * law.kappa * law.G.mean


def _cluster_contacts(kappa: float, G: SecondaryDistribution, M: int, eps: float) -> np.ndarray:
    """Pmf of ``kappa * (psi *_G 1)``: Pois(kappa z) mixed over ``z ~ G``."""
    zmax = tail_support(G, eps)
    return _compound.poisson_thinned_probs(pmf_array(G, zmax), kappa, M)


def _offspring_probs(law: OffspringLaw, M: int, eps: float) -> np.ndarray:
    probs = (1.0 - law.beta) * _cluster_contacts(law.kappa, law.G, M, eps / 2)
    if M >= 1:
        probs[1] += law.beta
    return probs


def _immigration_probs(law: ImmigrationLaw, M: int, eps: float) -> np.ndarray:
    # S = psi *_G I on a support wide enough that its own tail is below eps/3
    s_max = max(M, 16)
    while True:
        s = _compound.compound_poisson_probs(law.tau, law.G, s_max, eps / 6)
        if 1.0 - s.sum() <= eps / 3:
            break
        s_max *= 2
    return _compound.poisson_thinned_probs(s, law.kappa, M)


def offspring_pmf(law: OffspringLaw, M: int, eps: float) -> TruncatedPMF:
    """
    Truncated offspring pmf ``beta delta_1 + (1 - beta) law(kappa * (psi *_G 1))``.

    Raises
    ------
    TruncationError
        If more than ``eps`` of the mass is lost.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    return TruncatedPMF.from_probs(_offspring_probs(law, M, eps)).require(eps, "offspring pmf")


def immigration_pmf(law: ImmigrationLaw, M: int, eps: float) -> TruncatedPMF:
    """
    Truncated pmf of ``I* = kappa * (psi *_G I)``, ``I ~ Pois(tau)``.

    Built in stages: the Poisson-stopped sum ``S`` of ``G`` draws, then
    Poisson(kappa s) mixed over ``s``. Each stage drops at most ``eps / 3``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    return TruncatedPMF.from_probs(_immigration_probs(law, M, eps)).require(eps, "immigration pmf")


def check_conditions(params: ThinningParams, r: int = 2) -> BranchingReport:
    """
    Sufficient conditions for geometric ergodicity and finite ``r``-th moments.

    Subcriticality is ``kappa mu < 1``; the ``x log x`` condition holds whenever
    ``G`` has finite variance, which all supported kinds do.
    """
    off = OffspringLaw.from_params(params)
    imm = ImmigrationLaw.from_params(params)
    G = params.G
    subcritical = off.kappa * G.mean < 1.0
    xlogx = bool(np.isfinite(G.variance))
    imm_mean = imm.mean
    imm_finite = bool(np.isfinite(imm_mean))
    return BranchingReport(
        offspring_mean=offspring_mean(off),
        offspring_mean_lt_1=subcritical,
        xlogx_finite=xlogx,
        immigration_mean=imm_mean,
        immigration_mean_finite=imm_finite,
        geometrically_ergodic=subcritical and xlogx and imm_finite,
        moment_order_checked=int(r),
        moments_finite=has_finite_moment(G, r) and subcritical,
    )


def simulate_branching(
    e0,
    offspring: OffspringLaw,
    immigration: ImmigrationLaw,
    T: int,
    rng: np.random.Generator,
    reps: int | None = None,
) -> np.ndarray:
    """
    Simulate the pool as a branching process with immigration.

    Returns ``E_0..E_T`` (length ``T + 1`` along the last axis) started from
    ``e0``, which may be an array with one start per replicate.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if offspring.G != immigration.G or offspring.kappa != immigration.kappa:
        raise ParameterError("offspring and immigration laws must share kappa and G")
    shape = () if reps is None else (int(reps),)
    G, kappa = offspring.G, offspring.kappa
    out = np.empty(shape + (T + 1,), dtype=np.int64)
    out[..., 0] = np.broadcast_to(np.asarray(e0, dtype=np.int64), shape)
    compound = SumSampler(G, rng)
    for t in range(1, T + 1):
        prev = out[..., t - 1]
        stay = binomial_thin(offspring.beta, prev, rng)
        spawned = poisson_thin(kappa, compound(prev - stay), rng)
        imports = rng.poisson(immigration.tau, shape)
        immig = poisson_thin(kappa, compound(imports), rng)
        out[..., t] = stay + spawned + immig
    return out
