"""
Thinning and classical forms of the same count process
======================================================

A CP-INGARCH(1,1) model can be written as a conditional-mean recursion or
as a discrete-time epidemic in which an exposed pool is thinned each step.
This script maps one form to the other, simulates both and compares the
marginal laws of the counts.
"""

# %%
# Parameters
# ----------
# The epidemic form uses an immigration rate ``tau``, a contact rate
# ``kappa``, a retention probability ``beta`` and an initial pool mean
# ``eta``. Mapping it gives the classical coefficients.
import numpy as np

from cpingarch import (
    SecondaryDistribution,
    ThinningParams,
    map_to_classical,
    map_to_thinning,
    simulate_classical,
    simulate_thinning,
    stationary_mean,
)

tp = ThinningParams.ingarch11(tau=2.0, kappa=0.5, beta=0.3, eta=1.0)
cp = map_to_classical(tp)
print("classical:", cp)
print("round trip:", map_to_thinning(cp))

# %%
# Simulation
# ----------
# Both simulators take a numpy Generator. Independent streams keep the two
# runs unrelated.
rng = np.random.default_rng(np.random.SeedSequence(11))
r1, r2 = rng.spawn(2)
T, reps = 50, 20_000
x_thin = simulate_thinning(tp, T, r1, reps=reps).x
x_cls = simulate_classical(cp, T, r2, reps=reps).x

for t in (1, 5, 20, 50):
    a, b = x_thin[:, t - 1], x_cls[:, t - 1]
    print(f"t={t:2d}  mean {a.mean():.3f} vs {b.mean():.3f}   var {a.var():.3f} vs {b.var():.3f}")
print("stationary mean:", stationary_mean(cp))

# %%
# Compound Poisson counts
# -----------------------
# Each case may carry a random number of counted events. With a Poisson
# secondary law of mean 1.5 the counts are overdispersed.
G = SecondaryDistribution("poisson", 1.5)
tpg = ThinningParams.ingarch11(2.0, 0.3, 0.3, 1.0, G=G)
xg = simulate_thinning(tpg, 2000, r1).x
print(f"compound: mean {xg[200:].mean():.3f}  target {stationary_mean(map_to_classical(tpg)):.3f}"
      f"  dispersion {xg[200:].var() / xg[200:].mean():.2f}")
