"""Small statistical helpers shared by the test modules."""

import numpy as np
from scipy import stats


def within_se(sample, expected, k=4.0):
    """True when the sample mean is within ``k`` standard errors of ``expected``."""
    sample = np.asarray(sample, dtype=float)
    se = sample.std(ddof=1) / np.sqrt(sample.size)
    return abs(sample.mean() - expected) <= k * max(se, 1e-300)


def variance_within_se(sample, expected_var, k=4.0):
    """Sample variance against ``expected_var``, using the delta-method SE of s^2."""
    x = np.asarray(sample, dtype=float)
    d = (x - x.mean()) ** 2
    se = d.std(ddof=1) / np.sqrt(x.size)
    return abs(d.mean() - expected_var) <= k * se


def two_sample_pvalue(a, b, min_expected=5.0):
    """Chi-square homogeneity p-value for two integer samples, sparse bins pooled."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    top = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=top + 1)
    cb = np.bincount(b, minlength=top + 1)
    scale = min(a.size, b.size) / (a.size + b.size)
    starts, acc = [0], 0.0
    for k, c in enumerate((ca + cb) * scale):
        acc += c
        if acc >= min_expected:
            starts.append(k + 1)
            acc = 0.0
    if starts[-1] > top or acc < min_expected:
        starts.pop()
    table = np.vstack([np.add.reduceat(ca, starts), np.add.reduceat(cb, starts)])
    if table.shape[1] < 2:
        return 1.0
    return stats.chi2_contingency(table, correction=False)[1]
