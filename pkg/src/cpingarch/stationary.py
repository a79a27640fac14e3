"""
Limiting-stationary distributions by iterating truncated transition kernels.

The CP-INGARCH(1, 1) count process is not Markov, but its exposed pool
``E_t`` is. The pool law is obtained as the fixed point of the truncated
E-kernel and the count law follows by mixing ``P(X = i | E = k)`` over it.
For INARCH(1) the count process itself is Markov and is iterated directly.

Kernels are stored row = source state ``j``, column = target state ``i``.
Truncation losses are tracked as deficits and never renormalized silently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _compound
from .branching import (
    ImmigrationLaw,
    OffspringLaw,
    _immigration_probs,
    _offspring_probs,
    check_conditions,
    offspring_mean,
)
from .distributions import SecondaryDistribution, TruncatedPMF
from .epidemic import ThinningParams
from .errors import NonConvergenceWarning, RefusalError

__all__ = [
    "StationaryResult",
    "StationarySettings",
    "e_kernel",
    "e_stationary",
    "e_transition_row",
    "inarch1_stationary",
    "x_given_e_pmf",
    "x_stationary",
]

# below this step size successive iterates differ only by rounding
_NOISE_FLOOR = 1e-15


@dataclass(frozen=True)
class StationarySettings:
    M: int = 200
    T: int = 100_000
    tol: float = 1e-10
    eps: float = 1e-12

    def __post_init__(self):
        if self.M < 1 or self.T < 1 or not self.tol > 0 or not self.eps > 0:
            raise ValueError("need M >= 1, T >= 1, tol > 0 and eps > 0")

    def to_dict(self) -> dict:
        return {"M": self.M, "T": self.T, "tol": self.tol, "eps": self.eps}


@dataclass(frozen=True)
class StationaryResult:
    p_e: TruncatedPMF | None
    p_x: TruncatedPMF
    iterations_used: int
    final_tv_step: float
    converged: bool = True


@dataclass(frozen=True)
class _Iterate:
    probs: np.ndarray
    iterations: int
    step: float
    converged: bool


def _iterate(kernel: np.ndarray, start: int, settings: StationarySettings) -> _Iterate:
    """
    Power-iterate ``p <- p K`` from a point mass.

    Stops once the change in total variation is at most ``tol`` and the
    geometric extrapolation of the remaining distance to the fixed point,
    ``step * r / (1 - r)`` with ``r`` the observed contraction ratio, is at most
    ``tol`` as well.
    """
    p = np.zeros(kernel.shape[0])
    p[int(np.clip(start, 0, kernel.shape[0] - 1))] = 1.0
    prev = np.inf
    step = np.inf
    for it in range(1, settings.T + 1):
        new = p @ kernel
        step = 0.5 * float(np.abs(new - p).sum())
        p = new
        if step <= settings.tol:
            ratio = step / prev if prev > 0 else 0.0
            remaining = step * ratio / (1.0 - ratio) if ratio < 1.0 else np.inf
            if remaining <= settings.tol or step <= _NOISE_FLOOR:
                return _Iterate(p, it, step, True)
        prev = step
    warnings.warn(
        f"kernel iteration did not converge within T={settings.T} steps "
        f"(last TV step {step:.3e})",
        NonConvergenceWarning,
        stacklevel=3,
    )
    return _Iterate(p, settings.T, step, False)


def _require_subcritical(params: ThinningParams):
    report = check_conditions(params)
    if not report.geometrically_ergodic:
        raise RefusalError(
            f"kappa * mu = {params.kappa[0] * params.G.mean:g} >= 1: the pool process is "
            "not subcritical, so no limiting-stationary distribution is computed"
        )


def _e_rows(params: ThinningParams, M: int, eps: float, jmax: int) -> np.ndarray:
    # row j compounds the offspring cut-off j times, so it gets eps / (2 jmax)
    off = _offspring_probs(OffspringLaw.from_params(params), M, eps / (2 * max(jmax, 1)))
    imm = _immigration_probs(ImmigrationLaw.from_params(params), M, eps / 2)
    rows = np.empty((jmax + 1, M + 1))
    power = np.zeros(M + 1)
    power[0] = 1.0
    for j in range(jmax + 1):
        rows[j] = _compound.conv(power, imm, M)
        power = _compound.conv(power, off, M)
    return rows


def e_transition_row(
    j: int, params: ThinningParams, M: int, eps: float, strict: bool = True
) -> TruncatedPMF:
    """
    Law of ``E_t`` given ``E_{t-1} = j``: the ``j``-fold offspring convolution
    convolved with the immigration pmf, on ``0..M``.

    With ``strict`` a deficit above ``eps`` raises ``TruncationError``; rows for
    large ``j`` may legitimately put mass beyond ``M``, so pass
    ``strict=False`` to inspect them.
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    row = TruncatedPMF.from_probs(_e_rows(params, M, eps, j)[j])
    return row.require(eps, f"E-transition row {j}") if strict else row


def e_kernel(params: ThinningParams, M: int, eps: float) -> np.ndarray:
    """All rows ``j = 0..M`` of the truncated E-kernel."""
    return _e_rows(params, M, eps, M)


def _e_start(params: ThinningParams) -> int:
    off = OffspringLaw.from_params(params)
    imm = ImmigrationLaw.from_params(params)
    return int(round(imm.mean / (1.0 - offspring_mean(off))))


def _e_chain(params: ThinningParams, settings: StationarySettings, start: int | None) -> _Iterate:
    _require_subcritical(params)
    kernel = e_kernel(params, settings.M, settings.eps)
    return _iterate(kernel, _e_start(params) if start is None else start, settings)


def e_stationary(
    params: ThinningParams, settings: StationarySettings = StationarySettings(), start: int | None = None
) -> TruncatedPMF:
    """
    Limiting-stationary law of the exposed pool.

    ``start`` is the initial point mass; by default the state nearest the
    stationary mean ``E(I*) / (1 - E(B))``.

    Raises
    ------
    RefusalError
        If the pool process is not subcritical.
    """
    return TruncatedPMF.from_probs(_e_chain(params, settings, start).probs)


def _x_weights_pmf(params: ThinningParams, weights_a: np.ndarray, M: int, eps: float) -> np.ndarray:
    G = params.G
    imports = _compound.compound_poisson_probs(params.tau, G, M, eps / 2)
    advancing = _compound.mixture_probs(weights_a, G, M)
    return _compound.conv(imports, advancing, M)


def x_given_e_pmf(
    k: int, params: ThinningParams, M: int, eps: float, strict: bool = True
) -> TruncatedPMF:
    """Law of ``X_t = psi *_G (I_t + A_t)`` given ``E_t = k``, ``A_t ~ Bin(k, 1 - beta)``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    a = np.arange(k + 1)
    w = stats.binom.pmf(a, k, 1.0 - params.beta[0])
    out = TruncatedPMF.from_probs(_x_weights_pmf(params, w, M, eps))
    return out.require(eps, f"X given E={k}") if strict else out


def x_stationary(
    params: ThinningParams,
    settings: StationarySettings = StationarySettings(),
    start: int | None = None,
    renormalize: bool = False,
) -> StationaryResult:
    """
    Limiting-stationary laws of the pool and of the counts, CP-INGARCH(1, 1).

    ``p_x[i] = sum_k p_e[k] P(X = i | E = k)``. With ``renormalize`` both
    vectors are rescaled to unit mass for display; deficits are then zero.
    """
    chain = _e_chain(params, settings, start)
    M = settings.M
    k = np.arange(M + 1)
    # P(A = a) = sum_k p_e(k) Bin(k, 1 - beta)(a)
    binom = stats.binom.pmf(k[None, :], k[:, None], 1.0 - params.beta[0])
    w = chain.probs @ binom
    p_e = TruncatedPMF.from_probs(chain.probs)
    p_x = TruncatedPMF.from_probs(_x_weights_pmf(params, w, M, settings.eps))
    if renormalize:
        p_e, p_x = p_e.renormalized(), p_x.renormalized()
    return StationaryResult(p_e, p_x, chain.iterations, chain.step, chain.converged)


def inarch1_kernel(nu: float, alpha: float, G: SecondaryDistribution, M: int, eps: float) -> np.ndarray:
    lam = nu + alpha * np.arange(M + 1)
    return _compound.compound_poisson_probs(lam / G.mean, G, M, eps / 2)


def inarch1_stationary(
    nu: float,
    alpha: float,
    G: SecondaryDistribution,
    settings: StationarySettings = StationarySettings(),
    start: int | None = None,
) -> TruncatedPMF:
    """
    Stationary law of the INARCH(1) count chain, iterating it directly.

    Row ``j`` of the kernel is the compound Poisson law with mean
    ``nu + alpha j``.

    Raises
    ------
    RefusalError
        If ``alpha >= 1``.
    """
    if not alpha < 1.0:
        raise RefusalError(f"alpha = {alpha:g} >= 1: the INARCH(1) chain is not subcritical")
    kernel = inarch1_kernel(nu, alpha, G, settings.M, settings.eps)
    if start is None:
        start = int(round(nu / (1.0 - alpha)))
    return TruncatedPMF.from_probs(_iterate(kernel, start, settings).probs)
