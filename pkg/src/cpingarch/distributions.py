"""
Secondary (cluster-size) distributions and truncated probability vectors.

Four kinds are supported:

============  ==============  =====================================
kind          admissible psi  pmf
============  ==============  =====================================
unit          ignored         point mass at 1
logarithmic   0 < psi < 1     -psi**k / (k log(1 - psi)),  k >= 1
poisson       psi > 0         exp(-psi) psi**k / k!,        k >= 0
borel         0 <= psi < 1    exp(-k psi) (k psi)**(k-1) / k!, k >= 1
============  ==============  =====================================

With the unit kind a compound Poisson count is plain Poisson, so the same
code path serves the Poisson and the compound Poisson models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy

from .errors import ParameterError, TruncationError

__all__ = [
    "KINDS",
    "UNIT",
    "SecondaryDistribution",
    "TruncatedPMF",
    "moments",
    "pmf",
    "pmf_vector",
    "sample",
    "tail_support",
]

KINDS = ("unit", "logarithmic", "poisson", "borel")

# Borel draws whose total progeny exceeds this many individuals per ancestor
# are rejected and redrawn.
BOREL_CAP = 10**6


@dataclass(frozen=True)
class SecondaryDistribution:
    """Cluster-size law ``G(psi)`` of a compound Poisson distribution."""

    kind: str = "unit"
    psi: float = 0.0

    def __post_init__(self):
        kind = str(self.kind).lower()
        if kind not in KINDS:
            raise ParameterError(f"unknown secondary distribution kind {self.kind!r}")
        psi = 0.0 if kind == "unit" else float(self.psi)
        if not math.isfinite(psi):
            raise ParameterError(f"psi must be finite, got {self.psi!r}")
        if kind == "logarithmic" and not 0.0 < psi < 1.0:
            raise ParameterError(f"logarithmic requires 0 < psi < 1, got {psi}")
        if kind == "poisson" and not psi > 0.0:
            raise ParameterError(f"poisson requires psi > 0, got {psi}")
        if kind == "borel" and not 0.0 <= psi < 1.0:
            raise ParameterError(f"borel requires 0 <= psi < 1, got {psi}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "psi", psi)

    @classmethod
    def from_config(cls, cfg: dict) -> SecondaryDistribution:
        return cls(cfg.get("kind", "unit"), cfg.get("psi", 0.0))

    def to_config(self) -> dict:
        return {"kind": self.kind, "psi": self.psi}

    @property
    def mean(self) -> float:
        return moments(self)[0]

    @property
    def variance(self) -> float:
        return moments(self)[1]

    @property
    def min_support(self) -> int:
        """Smallest value with positive probability."""
        return 0 if self.kind == "poisson" else 1

    def __str__(self):
        if self.kind == "unit":
            return "unit"
        return f"{self.kind}({self.psi:g})"


UNIT = SecondaryDistribution("unit")


@dataclass(frozen=True)
class TruncatedPMF:
    """
    Probability vector on ``{0, ..., M}`` with an explicit tail deficit.

    ``deficit`` is ``1 - probs.sum()``: mass that lies beyond ``M`` or was
    dropped by a truncated mixture. It is never folded back into ``probs``
    unless :meth:`renormalized` is called.
    """

    probs: np.ndarray
    deficit: float = field(default=0.0)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("probs must be a non-empty 1-d vector")
        if np.any(probs < -1e-15):
            raise ValueError("probabilities must be nonnegative")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_probs(cls, probs) -> TruncatedPMF:
        probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        deficit = max(0.0, 1.0 - math.fsum(probs))
        return cls(probs, deficit)

    @property
    def M(self) -> int:
        return self.probs.size - 1

    def __len__(self):
        return self.probs.size

    def __getitem__(self, k):
        return self.probs[k]

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def moment(self, r: int) -> float:
        return float(np.dot(np.arange(self.probs.size, dtype=float) ** r, self.probs))

    def tv(self, other: TruncatedPMF | np.ndarray) -> float:
        """Total variation distance, padding the shorter vector with zeros."""
        q = other.probs if isinstance(other, TruncatedPMF) else np.asarray(other, float)
        n = max(self.probs.size, q.size)
        a = np.zeros(n)
        b = np.zeros(n)
        a[: self.probs.size] = self.probs
        b[: q.size] = q
        return 0.5 * float(np.abs(a - b).sum())

    def renormalized(self) -> TruncatedPMF:
        return TruncatedPMF(self.probs / self.probs.sum(), 0.0)

    def require(self, eps: float, what: str = "pmf") -> TruncatedPMF:
        if self.deficit > eps:
            raise TruncationError(
                f"{what}: support 0..{self.M} misses more than eps={eps:g}", self.deficit
            )
        return self


def moments(dist: SecondaryDistribution) -> tuple[float, float]:
    """Closed-form mean and variance of ``dist``."""
    psi = dist.psi
    if dist.kind == "unit":
        return 1.0, 0.0
    if dist.kind == "poisson":
        return psi, psi
    if dist.kind == "borel":
        return 1.0 / (1.0 - psi), psi / (1.0 - psi) ** 3
    # logarithmic
    log1m = math.log1p(-psi)
    mean = -psi / ((1.0 - psi) * log1m)
    var = -psi * (psi + log1m) / ((1.0 - psi) ** 2 * log1m**2)
    return mean, var


def has_finite_moment(dist: SecondaryDistribution, r: int) -> bool:
    # All four kinds have moments of every order on their admissible psi ranges.
    return dist.kind in KINDS and r >= 0


def pmf(dist: SecondaryDistribution, k):
    """P(Z = k); vectorized over ``k``."""
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise ValueError("k must be nonnegative")
    kf = k_arr.astype(float)
    psi = dist.psi
    if dist.kind == "unit":
        out = (k_arr == 1).astype(float)
    elif dist.kind == "poisson":
        out = stats.poisson.pmf(k_arr, psi)
    elif dist.kind == "logarithmic":
        with np.errstate(divide="ignore"):
            logp = kf * math.log(psi) - np.log(kf) - math.log(-math.log1p(-psi))
        out = np.where(k_arr >= 1, np.exp(logp), 0.0)
    else:  # borel
        kk = np.maximum(kf, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = -kk * psi + xlogy(kk - 1.0, kk * psi) - gammaln(kk + 1.0)
        out = np.where(k_arr >= 1, np.exp(logp), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def pmf_array(dist: SecondaryDistribution, M: int) -> np.ndarray:
    """pmf values on ``0..M`` without a deficit check."""
    return np.asarray(pmf(dist, np.arange(M + 1)), dtype=float).reshape(M + 1)


def pmf_vector(dist: SecondaryDistribution, M: int, eps: float) -> TruncatedPMF:
    """
    Truncated pmf of ``dist`` on ``0..M``.

    Raises
    ------
    TruncationError
        If more than ``eps`` of the mass lies beyond ``M``.
    """
    if M < 0 or not eps > 0:
        raise ValueError("need M >= 0 and eps > 0")
    return TruncatedPMF.from_probs(pmf_array(dist, M)).require(eps, str(dist))


def tail_support(dist: SecondaryDistribution, eps: float) -> int:
    """Smallest ``M`` with ``P(Z > M) <= eps``."""
    if dist.kind == "unit":
        return 1
    if dist.kind == "poisson":
        return int(stats.poisson.isf(eps, dist.psi)) + 1
    M = 16
    while True:
        tail = 1.0 - math.fsum(pmf_array(dist, M))
        if tail <= eps:
            # shrink to the first index meeting the bound
            cdf = np.cumsum(pmf_array(dist, M))
            return int(np.searchsorted(cdf, 1.0 - eps, side="left"))
        M *= 2


@lru_cache(maxsize=64)
def _log_cdf_table(psi: float) -> np.ndarray:
    """Cumulative logarithmic probabilities P(Z <= k) for k = 1..K."""
    L = -math.log1p(-psi)
    K = 64
    # tail after K is at most psi**(K+1) / ((K+1) L (1-psi))
    while (K + 1) * math.log(psi) - math.log((K + 1) * L * (1.0 - psi)) > math.log(1e-18):
        K *= 2
    k = np.arange(1, K + 1, dtype=float)
    cdf = np.cumsum(np.exp(k * math.log(psi) - np.log(k)) / L)
    cdf.setflags(write=False)
    return cdf


def _sample_logarithmic(psi: float, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = _log_cdf_table(psi)
    u = rng.random(n)
    out = np.searchsorted(cdf, u, side="right").astype(np.int64) + 1
    for i in np.flatnonzero(out > cdf.size):
        # u beyond the cached table (probability below 1e-16): walk on
        k, c = cdf.size, cdf[-1]
        L = -math.log1p(-psi)
        while c <= u[i]:
            k += 1
            c += psi**k / (k * L)
            if psi**k == 0.0:
                break
        out[i] = k
    return out


def _total_progeny(psi: float, ancestors: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Total size of Poisson(psi) Galton-Watson trees started from each ancestor count."""
    ancestors = np.asarray(ancestors, dtype=np.int64)
    if psi == 0.0:
        return ancestors.copy()
    cap = BOREL_CAP * np.maximum(ancestors, 1)
    total = np.zeros_like(ancestors)
    pending = np.arange(ancestors.size)
    while pending.size:
        tot = ancestors[pending].copy()
        gen = tot.copy()
        while gen.any():
            gen = rng.poisson(psi * gen)
            tot += gen
            # stop growing trees that already broke the cap
            gen[tot > cap[pending]] = 0
        ok = tot <= cap[pending]
        total[pending[ok]] = tot[ok]
        pending = pending[~ok]
    return total


def sample(dist: SecondaryDistribution, rng: np.random.Generator, size=None):
    """Independent draws from ``dist``."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape, dtype=np.int64))
    if dist.kind == "unit":
        out = np.ones(n, dtype=np.int64)
    elif dist.kind == "poisson":
        out = rng.poisson(dist.psi, n)
    elif dist.kind == "logarithmic":
        out = _sample_logarithmic(dist.psi, n, rng)
    else:
        out = _total_progeny(dist.psi, np.ones(n, dtype=np.int64), rng)
    out = out.reshape(shape)
    return int(out) if size is None else out


def sample_sum(dist: SecondaryDistribution, n, rng: np.random.Generator):
    """Sums of ``n`` independent draws, elementwise over the count array ``n``."""
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 0):
        raise ValueError("counts must be nonnegative")
    if dist.kind == "unit":
        return n.copy()
    if dist.kind == "poisson":
        return rng.poisson(dist.psi * n)
    if dist.kind == "borel":
        return _total_progeny(dist.psi, n.ravel(), rng).reshape(n.shape)
    flat = n.ravel()
    draws = _sample_logarithmic(dist.psi, int(flat.sum()), rng)
    csum = np.concatenate(([0], np.cumsum(draws)))
    ends = np.cumsum(flat)
    return (csum[ends] - csum[ends - flat]).reshape(n.shape)


class SumSampler:
    """
    Sums of i.i.d. ``G`` draws for use inside simulation loops.

    Draws are made in bulk batches and consumed in order, which gives the
    same law as drawing each sum afresh at a fraction of the per-call cost.
    """

    def __init__(self, dist: SecondaryDistribution, rng: np.random.Generator, batch: int = 1 << 16):
        self.dist = dist
        self.rng = rng
        self.batch = int(batch)
        self._csum = np.zeros(1, dtype=np.int64)
        self._pos = 0

    def _refill(self, need: int):
        kind = self.dist.kind
        n = max(self.batch, need)
        if kind == "logarithmic":
            fresh = _sample_logarithmic(self.dist.psi, n, self.rng)
        else:
            fresh = _total_progeny(self.dist.psi, np.ones(n, dtype=np.int64), self.rng)
        rest = np.diff(self._csum[self._pos:])
        self._csum = np.concatenate(([0], np.cumsum(np.concatenate((rest, fresh)))))
        self._pos = 0

    def __call__(self, n):
        kind = self.dist.kind
        if kind == "unit":
            return n
        if kind == "poisson":
            return self.rng.poisson(self.dist.psi * n)
        n = np.asarray(n, dtype=np.int64)
        ends = np.cumsum(n.ravel())
        total = int(ends[-1]) if ends.size else 0
        if self._pos + total >= self._csum.size:
            self._refill(total)
        base = self._csum[self._pos :]
        out = (base[ends] - base[ends - n.ravel()]).reshape(n.shape)
        self._pos += total
        return out
