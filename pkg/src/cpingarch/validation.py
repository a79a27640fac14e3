"""
Statistical checks that the thinning representation reproduces the classical
model, that the pool behaves as the branching process it is claimed to be,
and that the stationary and moment results hold up in simulation.

Every check takes an explicit ``seed`` and returns a :class:`CheckReport`.
``passed`` is always ``statistic <= threshold``; for chi-square checks the
threshold is the critical value at the requested level, so the p-value is
reported separately in ``details``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _compound
from ._rng import stream
from .branching import ImmigrationLaw, OffspringLaw, check_conditions, simulate_branching
from .classical import ClassicalParams
from .epidemic import (
    ThinningParams,
    iter_counts,
    latent_period_pmf,
    map_to_classical,
    simulate_thinning,
)
from .errors import ParameterError
from .stationary import StationarySettings, inarch1_stationary, x_stationary

__all__ = [
    "CheckReport",
    "SUITES",
    "check_branching_equivalence",
    "check_conditional_equivalence",
    "check_cross_method",
    "check_latent_period",
    "check_mean_recursion",
    "check_moment_stability",
    "check_stationary_agreement",
    "expected_counts",
    "moment_stability_reports",
    "run_suite",
]

# spawn keys, one per check family, so checks sharing a seed stay independent
_KEY_CONDITIONAL = 1
_KEY_MEAN = 2
_KEY_STATIONARY = 3
_KEY_BRANCHING = 4
_KEY_LATENT = 5
_KEY_MOMENTS = 6


@dataclass(frozen=True)
class CheckReport:
    """
    Outcome of one check.

    ``applicable`` is false when the check's precondition does not hold; such a
    report is a refusal, not a failure, and has ``passed = False``.
    """

    name: str
    statistic: float
    threshold: float
    samples_used: int
    passed: bool
    details: dict = field(default_factory=dict)
    applicable: bool = True

    @classmethod
    def make(cls, name, statistic, threshold, samples_used, details=None) -> CheckReport:
        statistic, threshold = float(statistic), float(threshold)
        return cls(name, statistic, threshold, int(samples_used), bool(statistic <= threshold),
                   dict(details or {}))

    @classmethod
    def not_applicable(cls, name, reason: str) -> CheckReport:
        return cls(name, math.nan, math.nan, 0, False, {"reason": reason}, applicable=False)

    @property
    def failed(self) -> bool:
        return self.applicable and not self.passed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "statistic": _plain(self.statistic),
            "threshold": _plain(self.threshold),
            "samples_used": self.samples_used,
            "passed": self.passed,
            "applicable": self.applicable,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(v):
    """Convert numpy scalars and arrays to JSON-friendly Python values."""
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


# ---------------------------------------------------------------- chi-square


def _pool_starts(expected: np.ndarray, total: float, min_expected: float = 5.0) -> np.ndarray:
    """
    Left edges of bins with expected count at least ``min_expected``.

    ``expected[k]`` is the expected count of value ``k``; the last bin is open
    to the right and collects the tail mass ``total - sum(expected)``.
    """
    starts = [0]
    acc = 0.0
    for k, e in enumerate(expected):
        acc += e
        if acc >= min_expected:
            starts.append(k + 1)
            acc = 0.0
    tail = total - float(np.sum(expected[: starts[-1]]))
    if tail < min_expected and len(starts) > 1:
        starts.pop()
    return np.asarray(starts)


def _binned(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(starts, values, side="right") - 1
    return np.bincount(idx, minlength=starts.size)


def _binned_expected(expected: np.ndarray, starts: np.ndarray, total: float) -> np.ndarray:
    cum = np.concatenate(([0.0], np.cumsum(expected)))
    edges = np.minimum(starts, expected.size)
    out = np.diff(cum[edges])
    return np.append(out, total - cum[edges[-1]])


def _gof(observed_values: np.ndarray, expected: np.ndarray, total: float, level: float):
    """Pearson goodness of fit of integer data to expected counts on ``0..K`` plus a tail."""
    starts = _pool_starts(expected, total)
    obs = _binned(observed_values, starts)
    exp = _binned_expected(expected, starts, total)
    df = starts.size - 1
    if df < 1:
        return None
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    return chi2, float(stats.chi2.isf(level, df)), float(stats.chi2.sf(chi2, df)), df


def _two_sample(a: np.ndarray, b: np.ndarray, level: float):
    """Chi-square homogeneity test of two integer samples, bins pooled to expected >= 5."""
    top = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=top + 1)
    cb = np.bincount(b, minlength=top + 1)
    # smallest expected cell of a pooled bin is its combined count times min(na, nb) / n
    scale = min(a.size, b.size) / (a.size + b.size)
    combined = (ca + cb) * scale
    starts = _pool_starts(combined, float(combined.sum()))
    table = np.vstack([np.add.reduceat(ca, starts), np.add.reduceat(cb, starts)])
    df = starts.size - 1
    if df < 1:
        return None
    chi2, _, _, _ = stats.chi2_contingency(table, correction=False)
    return float(chi2), float(stats.chi2.isf(level, df)), float(stats.chi2.sf(chi2, df)), df


# ------------------------------------------------------------ equivalences


def _classical_lambdas(cp: ClassicalParams, x: np.ndarray, alpha_scale: float = 1.0) -> np.ndarray:
    """``lambda_1..lambda_T`` along each row of counts ``x`` (shape ``(reps, T)``)."""
    reps, T = x.shape
    p, q = cp.p, cp.q
    alpha = alpha_scale * np.asarray(cp.alpha)[::-1]
    beta = np.asarray(cp.beta)[::-1]
    xs = np.hstack([np.tile(np.asarray(cp.x_init, float), (reps, 1)), x.astype(float)])
    lam = np.zeros((reps, q + T))
    lam[:, :q] = cp.lambda_init
    for t in range(T):
        lam[:, q + t] = cp.nu + xs[:, t : t + p] @ alpha + lam[:, t : t + q] @ beta
    return lam[:, q:]


def expected_counts(lambdas, G, M: int, eps: float = 1e-13) -> np.ndarray:
    """
    ``sum_r P(X = k | lambda_r)`` for ``k = 0..M`` under the compound Poisson law.

    The Poisson weights are summed over replicates before mixing the
    convolution powers of ``G``, so memory stays linear in ``M``.
    """
    rates = np.asarray(lambdas, dtype=float).ravel() / G.mean
    n_max = _compound.n_cutoff(float(rates.max()), eps, G, M)
    n = np.arange(n_max + 1)
    weights = np.zeros(n_max + 1)
    for chunk in np.array_split(rates, max(1, rates.size // 20_000)):
        weights += stats.poisson.pmf(n[None, :], chunk[:, None]).sum(axis=0)
    return weights @ _compound.g_powers(G, M, n_max)


def check_conditional_equivalence(
    tp: ThinningParams,
    t: int,
    reps: int = 100_000,
    level: float = 0.01,
    seed: int = 0,
    alpha_scale: float = 1.0,
    max_retries: int = 3,
) -> CheckReport:
    """
    Chi-square check that ``X_t`` given the past follows the classical law.

    ``reps`` independent thinning trajectories are run to time ``t``. For each,
    ``lambda_t`` is computed from its own count history with the classical
    recursion of ``map_to_classical(tp)``, and the observed ``X_t`` are tested
    against the summed conditional pmfs ``sum_r P(X = k | lambda_r)``. Under
    the equivalence each ``X_t`` is an independent draw from its own
    conditional law, so the Pearson statistic is conservative.

    ``alpha_scale != 1`` deliberately mis-maps ``alpha`` as a negative control.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if reps < 10_000:
        raise ValueError("reps must be >= 10^4")
    cp = map_to_classical(tp)
    name = f"conditional_equivalence[t={t}]"
    if alpha_scale != 1.0:
        name += f"[alpha x{alpha_scale:g}]"
    for attempt in range(max_retries):
        rng = stream(seed, _KEY_CONDITIONAL, t, attempt)
        x = simulate_thinning(tp, t, rng, reps=reps).x
        # lambda_t only depends on X_1..X_{t-1}
        lam_t = _classical_lambdas(cp, x, alpha_scale)[:, t - 1]
        if not np.all(np.isfinite(lam_t)) or lam_t.min() <= 0:
            continue
        observed = x[:, t - 1]
        expected = expected_counts(lam_t, tp.G, int(observed.max()))
        res = _gof(observed, expected, float(reps), level)
        if res is None:
            continue
        chi2, crit, pval, df = res
        return CheckReport.make(
            name, chi2, crit, reps,
            {"level": level, "p_value": pval, "df": df, "seed": seed, "attempt": attempt,
             "alpha_scale": alpha_scale},
        )
    raise RuntimeError(f"{name}: no usable history after {max_retries} attempts")


def mean_recursion(cp: ClassicalParams, horizon: int, alpha_scale: float = 1.0) -> np.ndarray:
    """``E[X_t] = E[lambda_t]``, ``t = 1..horizon``, by iterating the recursion on expectations."""
    x = list(map(float, cp.x_init))
    lam = list(cp.lambda_init)
    out = np.empty(horizon)
    for t in range(horizon):
        m = cp.nu
        m += alpha_scale * sum(a * x[-1 - i] for i, a in enumerate(cp.alpha))
        m += sum(b * lam[-1 - j] for j, b in enumerate(cp.beta))
        out[t] = m
        x.append(m)
        lam.append(m)
    return out


def check_mean_recursion(
    tp: ThinningParams,
    horizon: int,
    reps: int = 100_000,
    seed: int = 0,
    alpha_scale: float = 1.0,
    z_max: float = 4.0,
) -> CheckReport:
    """
    Compare ``E[X_t]`` over ``reps`` thinning trajectories with the mean recursion.

    The statistic is the largest ``|z|`` over ``t = 1..horizon``; no
    ergodicity is needed, so supercritical parameters can be checked too.
    """
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    x = simulate_thinning(tp, horizon, stream(seed, _KEY_MEAN), reps=reps).x
    target = mean_recursion(map_to_classical(tp), horizon, alpha_scale)
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(reps)
    z = (mean - target) / np.where(se > 0, se, np.inf)
    name = "mean_recursion" + (f"[alpha x{alpha_scale:g}]" if alpha_scale != 1.0 else "")
    return CheckReport.make(
        name, np.max(np.abs(z)), z_max, reps,
        {"horizon": horizon, "worst_t": int(np.argmax(np.abs(z))) + 1, "seed": seed,
         "z": z, "empirical_mean": mean, "recursion_mean": target},
    )


def check_branching_equivalence(
    tp: ThinningParams, t: int, reps: int = 100_000, level: float = 0.01, seed: int = 0
) -> CheckReport:
    """
    Two-sample chi-square test of ``E_t`` from the thinning and branching simulators.

    With ``X_0`` fixed, ``E_1 = beta o E_0 + kappa * X_0 ~ Pois(beta eta + kappa X_0)``
    and every later step is one branching generation, so the branching runs
    start from that law at ``t = 1``.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    e_thin = simulate_thinning(tp, t, stream(seed, _KEY_BRANCHING, t, 0), reps=reps).e[:, t - 1]
    rng = stream(seed, _KEY_BRANCHING, t, 1)
    rate1 = tp.beta[0] * tp.eta[0] + tp.kappa[0] * tp.x_init[0]
    e1 = rng.poisson(rate1, reps)
    if t == 1:
        e_branch = e1
    else:
        path = simulate_branching(
            e1, OffspringLaw.from_params(tp), ImmigrationLaw.from_params(tp), t - 1, rng, reps=reps
        )
        e_branch = path[:, t - 1]
    res = _two_sample(e_thin, e_branch, level)
    if res is None:
        return CheckReport.not_applicable(f"branching_equivalence[t={t}]", "all mass in one bin")
    chi2, crit, pval, df = res
    return CheckReport.make(
        f"branching_equivalence[t={t}]", chi2, crit, 2 * reps,
        {"level": level, "p_value": pval, "df": df, "seed": seed},
    )


def check_latent_period(
    tp: ThinningParams,
    entries: int = 100_000,
    level: float = 0.01,
    seed: int = 0,
    horizon: int = 30,
) -> CheckReport:
    """
    Chi-square test of observed latent periods against :func:`latent_period_pmf`.

    Pool members are followed individually. Only members entering at
    ``1 <= s <= T - horizon`` are used, so each is seen either to leave within
    ``horizon + 1`` steps or to still be waiting, which goes to the tail bin.
    The run is long enough to collect about ``entries`` such members.
    """
    cp = map_to_classical(tp)
    rate = sum(tp.kappa) * _mean_level(cp, tp)
    steps = int(math.ceil(1.15 * entries / rate)) + horizon
    path = simulate_thinning(tp, steps, stream(seed, _KEY_LATENT), track_latent=True)
    rows = path.latent
    keep = (rows[:, 0] >= 1) & (rows[:, 0] <= steps - horizon)
    rows = rows[keep]
    n = int(rows[:, 2].sum())
    period = np.where(rows[:, 1] >= 0, rows[:, 1] - rows[:, 0] + 1, horizon + 2)
    period = np.minimum(period, horizon + 2)
    values = np.repeat(period, rows[:, 2])
    pmf = latent_period_pmf(tp.beta, horizon + 1).probs
    res = _gof(values, n * pmf, float(n), level)
    chi2, crit, pval, df = res
    return CheckReport.make(
        "latent_period", chi2, crit, n,
        {"level": level, "p_value": pval, "df": df, "seed": seed, "steps": steps,
         "horizon": horizon, "empirical_mean": float(values.mean())},
    )


def _mean_level(cp: ClassicalParams, tp: ThinningParams) -> float:
    """Typical count level: the stationary mean if finite, else the initial mean."""
    denom = 1.0 - sum(cp.alpha) - sum(cp.beta)
    if denom > 0:
        return cp.nu / denom
    return max(cp.lambda_init)


# ---------------------------------------------------------- stationarity


def check_stationary_agreement(
    tp: ThinningParams,
    settings: StationarySettings = StationarySettings(),
    steps: int = 1_000_000,
    seed: int = 0,
    burn_in: int = 1000,
    threshold: float = 0.01,
) -> CheckReport:
    """
    TV distance between ``x_stationary(tp).p_x`` and the histogram of one long path.

    Raises
    ------
    RefusalError
        If the pool process is not subcritical.
    """
    result = x_stationary(tp, settings)
    counts = np.zeros(1, dtype=np.int64)
    skipped = 0
    for block in iter_counts(tp, burn_in + steps, stream(seed, _KEY_STATIONARY)):
        if skipped < burn_in:
            drop = min(burn_in - skipped, block.size)
            skipped += drop
            block = block[drop:]
        c = np.bincount(block)
        if c.size > counts.size:
            c[: counts.size] += counts
            counts = c
        else:
            counts[: c.size] += c
    hist = counts / steps
    tv = result.p_x.tv(hist)
    return CheckReport.make(
        "stationary_agreement", tv, threshold, steps,
        {"seed": seed, "burn_in": burn_in, "iterations_used": result.iterations_used,
         "deficit_e": result.p_e.deficit, "deficit_x": result.p_x.deficit,
         "pmf_mean": result.p_x.mean(), "path_mean": float(np.dot(np.arange(counts.size), hist))},
    )


def check_cross_method(
    tp: ThinningParams, settings: StationarySettings = StationarySettings(), threshold: float = 1e-6
) -> CheckReport:
    """For ``beta = 0``: TV between the pool-chain and direct INARCH(1) stationary laws."""
    if tp.beta != (0.0,):
        raise ParameterError("the cross-method check needs order (1, 1) with beta = 0")
    cp = map_to_classical(tp)
    via_pool = x_stationary(tp, settings).p_x
    direct = inarch1_stationary(cp.nu, cp.alpha[0], tp.G, settings)
    return CheckReport.make(
        "cross_method", via_pool.tv(direct), threshold, 0,
        {"deficit_pool": via_pool.deficit, "deficit_direct": direct.deficit},
    )


def check_moment_stability(
    tp: ThinningParams,
    r: int,
    seeds: int = 20,
    seed: int = 0,
    prefixes: tuple[int, ...] = (10**4, 10**5, 10**6),
    tolerance: float = 0.2,
    quorum: float = 0.9,
) -> CheckReport:
    """
    Stability of running ``r``-th sample moments along long trajectories.

    ``seeds`` independent chains are run from one seeded stream. A chain is
    stable when its raw ``r``-th moment over the two longest prefixes differs
    by less than ``tolerance`` relative; the check passes when at least
    ``quorum`` of the chains are stable. The statistic is the unstable fraction.
    If the ``r``-th stationary moment is not known to be finite the check is
    reported as not applicable.
    """
    (report,) = moment_stability_reports(tp, (r,), seeds, seed, prefixes, tolerance, quorum)
    return report


def moment_stability_reports(
    tp: ThinningParams,
    orders=(2, 4),
    seeds: int = 20,
    seed: int = 0,
    prefixes: tuple[int, ...] = (10**4, 10**5, 10**6),
    tolerance: float = 0.2,
    quorum: float = 0.9,
) -> list[CheckReport]:
    """:func:`check_moment_stability` for several orders, sharing one set of chains."""
    reports = {}
    for r in orders:
        if not check_conditions(tp, r).moments_finite:
            reports[r] = CheckReport.not_applicable(
                f"moment_stability[r={r}]",
                f"moments of order {r} not guaranteed (kappa * mu = {tp.kappa[0] * tp.G.mean:g})",
            )
    live = [r for r in orders if r not in reports]
    if live:
        prefixes = tuple(sorted(int(p) for p in prefixes))
        chunk = math.gcd(*prefixes)
        while chunk > 1 << 15 and chunk % 2 == 0:
            chunk //= 2
        sums = np.zeros((len(live), seeds))
        done = 0
        moments = {}
        powers = np.asarray(live, dtype=float)[:, None, None]
        for block in iter_counts(tp, prefixes[-1], stream(seed, _KEY_MOMENTS), reps=seeds, chunk=chunk):
            sums += (block.astype(float)[None] ** powers).sum(axis=2)
            done += block.shape[1]
            if done in prefixes:
                moments[done] = sums / done
        mid, big = moments[prefixes[-2]], moments[prefixes[-1]]
        rel = np.abs(big - mid) / np.abs(big)
        for k, r in enumerate(live):
            unstable = float(np.mean(rel[k] >= tolerance))
            reports[r] = CheckReport.make(
                f"moment_stability[r={r}]", unstable, 1.0 - quorum, seeds * prefixes[-1],
                {"seed": seed, "tolerance": tolerance, "quorum": quorum,
                 "max_relative_change": rel[k].max(),
                 "moments": {str(n): m[k] for n, m in moments.items()}},
            )
    return [reports[r] for r in orders]


# ------------------------------------------------------------------ suites


def _suite_default(tp: ThinningParams, settings: StationarySettings, seed: int):
    checks = [lambda t=t: check_conditional_equivalence(tp, t, 100_000, 0.01, seed)
              for t in (1, 2, 5, 10, 20)]
    checks.append(lambda: check_mean_recursion(tp, 20, 100_000, seed))
    checks.append(lambda: check_latent_period(tp, 100_000, 0.01, seed))
    if (tp.p, tp.q) == (1, 1):
        checks += [lambda t=t: check_branching_equivalence(tp, t, 100_000, 0.01, seed)
                   for t in (1, 3, 5, 10)]
        if check_conditions(tp).geometrically_ergodic:
            checks.append(lambda: check_stationary_agreement(tp, settings, 1_000_000, seed))
            checks.append(lambda: check_moment_stability(tp, 2, 20, seed))
            if tp.beta[0] == 0.0:
                checks.append(lambda: check_cross_method(tp, settings))
    return checks


def _suite_quick(tp: ThinningParams, settings: StationarySettings, seed: int):
    checks = [lambda t=t: check_conditional_equivalence(tp, t, 20_000, 0.01, seed) for t in (1, 5)]
    checks.append(lambda: check_mean_recursion(tp, 10, 20_000, seed))
    checks.append(lambda: check_latent_period(tp, 20_000, 0.01, seed))
    if (tp.p, tp.q) == (1, 1):
        checks.append(lambda: check_branching_equivalence(tp, 3, 20_000, 0.01, seed))
        if check_conditions(tp).geometrically_ergodic and tp.beta[0] == 0.0:
            checks.append(lambda: check_cross_method(tp, settings))
    return checks


SUITES = {"default": _suite_default, "quick": _suite_quick}


def run_suite(
    tp: ThinningParams,
    suite: str = "default",
    seed: int = 0,
    settings: StationarySettings = StationarySettings(),
    threads: int = 1,
) -> list[CheckReport]:
    """
    Run a named suite of checks. Reports come back in suite order whatever
    the number of worker threads.
    """
    try:
        build = SUITES[suite]
    except KeyError:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}") from None
    checks = build(tp, settings, seed)
    if threads <= 1:
        return [c() for c in checks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: c(), checks))
