"""
Thinning and compounding operators on counts.

Every operator is vectorized: ``N`` may be a count or an integer array, and
the result has the same shape.
"""

from __future__ import annotations

import numpy as np

from .distributions import SecondaryDistribution, sample_sum
from .errors import ParameterError

__all__ = ["binomial_thin", "compound_thin", "multinomial_split", "poisson_thin"]


def _counts(N):
    n = np.asarray(N, dtype=np.int64)
    if np.any(n < 0):
        raise ParameterError("counts must be nonnegative")
    return n


def binomial_thin(pi: float, N, rng: np.random.Generator):
    """``pi o N``: each of ``N`` units survives independently with probability ``pi``."""
    if not 0.0 <= pi <= 1.0:
        raise ParameterError(f"thinning probability must lie in [0, 1], got {pi}")
    return rng.binomial(_counts(N), pi)


def poisson_thin(kappa: float, N, rng: np.random.Generator):
    """``kappa * N``: sum of ``N`` independent Pois(kappa), drawn as one Pois(kappa N)."""
    if not kappa >= 0.0:
        raise ParameterError(f"Poisson thinning rate must be >= 0, got {kappa}")
    return rng.poisson(kappa * _counts(N))


def compound_thin(dist: SecondaryDistribution, N, rng: np.random.Generator):
    """``psi *_G N``: sum of ``N`` independent draws from ``dist``."""
    return sample_sum(dist, _counts(N), rng)


def multinomial_split(E, beta, rng: np.random.Generator):
    """
    Split ``E`` units into ``q`` jump classes and one exit class.

    Parameters
    ----------
    E : int or array of int
        Units to split.
    beta : sequence of float
        Jump probabilities ``beta_1..beta_q``; the exit class gets
        ``1 - sum(beta)``.

    Returns
    -------
    jumps : ndarray
        Shape ``E.shape + (q,)``.
    exits : ndarray
        Shape ``E.shape``; ``jumps.sum(-1) + exits == E`` exactly.
    """
    b = np.asarray(beta, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ParameterError("beta must be a non-empty vector")
    if np.any(b < 0) or b.sum() >= 1.0:
        raise ParameterError(f"need beta_j >= 0 and sum(beta) < 1, got {tuple(b)}")
    e = _counts(E)
    parts = rng.multinomial(e, np.append(b, 1.0 - b.sum()))
    return parts[..., :-1], parts[..., -1]
