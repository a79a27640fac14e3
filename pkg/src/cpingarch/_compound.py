"""Convolution engine shared by the conditional, branching and stationary pmfs.

All vectors live on ``{0, ..., M}``. Truncating a convolution of
nonnegative-support pmfs at ``M`` is exact for the entries kept, so the only
approximation anywhere is where an infinite mixture is cut off.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import stats

from .distributions import SecondaryDistribution, pmf_array


def conv(a: np.ndarray, b: np.ndarray, M: int) -> np.ndarray:
    """Convolution of two pmf vectors truncated to ``0..M``."""
    out = np.convolve(a[: M + 1], b[: M + 1])[: M + 1]
    if out.size < M + 1:
        out = np.pad(out, (0, M + 1 - out.size))
    return out


def _next_pow2(n: int) -> int:
    return 1 << max(int(n), 1).bit_length()


@lru_cache(maxsize=32)
def _powers_cached(dist: SecondaryDistribution, M: int, n_max: int) -> np.ndarray:
    g = pmf_array(dist, M)
    out = np.zeros((n_max + 1, M + 1))
    out[0, 0] = 1.0
    for n in range(1, n_max + 1):
        out[n] = conv(out[n - 1], g, M)
    out.setflags(write=False)
    return out


def g_powers(dist: SecondaryDistribution, M: int, n_max: int) -> np.ndarray:
    """Rows ``n = 0..n_max`` hold the ``n``-fold convolution of G on ``0..M``."""
    n_max = int(n_max)
    return _powers_cached(dist, M, _next_pow2(n_max))[: n_max + 1]


def n_cutoff(rate: float, eps: float, dist: SecondaryDistribution, M: int) -> int:
    """Number of Poisson terms needed so the dropped tail is at most ``eps``."""
    if rate <= 0:
        return 0
    n = int(stats.poisson.isf(eps, rate)) + 1
    if dist.min_support >= 1:
        # n-fold sums of a law on {1, 2, ...} exceed M once n > M
        n = min(n, M)
    return n


def compound_poisson_probs(rates, dist: SecondaryDistribution, M: int, eps: float):
    """
    Truncated pmf of ``sum_{i=1}^N Z_i`` with ``N ~ Pois(rate)``, ``Z_i ~ G``.

    Vectorized over ``rates``: returns shape ``(len(rates), M + 1)``, or
    ``(M + 1,)`` for a scalar rate. The Poisson mixture is cut where its tail
    drops below ``eps``; no deficit check is made here.
    """
    r = np.asarray(rates, dtype=float)
    flat = np.atleast_1d(r)
    n_max = n_cutoff(float(flat.max()), eps, dist, M)
    n = np.arange(n_max + 1)
    weights = stats.poisson.pmf(n[None, :], flat[:, None])
    out = weights @ g_powers(dist, M, n_max)
    return out[0] if r.ndim == 0 else out


def mixture_probs(weights: np.ndarray, dist: SecondaryDistribution, M: int) -> np.ndarray:
    """``sum_n weights[n] * G^{*n}`` on ``0..M``."""
    w = np.asarray(weights, dtype=float)
    n_max = w.shape[-1] - 1
    if dist.min_support >= 1 and n_max > M:
        w = w[..., : M + 1]
        n_max = M
    return w @ g_powers(dist, M, n_max)


def poisson_thinned_probs(weights_s: np.ndarray, kappa: float, M: int) -> np.ndarray:
    """Pmf of ``kappa * S`` Poisson-thinned: ``sum_s w_s Pois(kappa s)(k)``, k = 0..M."""
    w = np.asarray(weights_s, dtype=float)
    s = np.arange(w.size, dtype=float)
    k = np.arange(M + 1)
    keep = w > 0
    kernel = stats.poisson.pmf(k[None, :], kappa * s[keep][:, None])
    return w[keep] @ kernel
