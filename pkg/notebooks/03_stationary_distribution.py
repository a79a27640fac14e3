"""
Stationary distribution from a truncated kernel
===============================================

The exposed pool is a Markov chain on the nonnegative integers. Truncating
its transition kernel at ``M`` and iterating gives the stationary law of the
pool, and mixing the count law over it gives the stationary law of ``X``.
"""

# %%
import numpy as np

from cpingarch import (
    StationarySettings,
    ThinningParams,
    iter_counts,
    map_to_classical,
    stationary_mean,
    x_stationary,
)

tp = ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0)
res = x_stationary(tp, StationarySettings(M=150))
print("iterations:", res.iterations_used, " converged:", res.converged)
print("mean of p_x:", res.p_x.mean(), " closed form:", stationary_mean(map_to_classical(tp)))

# %%
# Against a long simulated path
# -----------------------------
# ``iter_counts`` streams the path in blocks so a million steps stay cheap.
counts = np.zeros(res.p_x.probs.size)
rng = np.random.default_rng(np.random.SeedSequence(13))
for block in iter_counts(tp, 200_000, rng):
    counts += np.bincount(block[block < counts.size], minlength=counts.size)
emp = counts / counts.sum()
print("total variation to the empirical histogram:", res.p_x.tv(emp))
for k in range(8):
    print(f"P(X={k}) = {res.p_x.probs[k]:.4f}   empirical {emp[k]:.4f}")
