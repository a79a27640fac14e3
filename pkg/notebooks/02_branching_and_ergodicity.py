"""
The exposed pool as a branching process with immigration
========================================================

Exposed individuals either stay exposed or become infectious and
generate new exposures, so the pool is a Galton-Watson process with
immigration. Its offspring mean decides ergodicity.
"""

# %%
import numpy as np

from cpingarch import (
    ImmigrationLaw,
    OffspringLaw,
    SecondaryDistribution,
    ThinningParams,
    check_conditions,
    e_stationary,
    offspring_mean,
    simulate_branching,
    simulate_thinning,
)

# %%
# Offspring mean and the ergodicity verdict
# -----------------------------------------
# The verdict reduces to ``kappa * mu < 1`` where ``mu`` is the mean of the
# secondary distribution.
for kind, psi in [("unit", None), ("logarithmic", 0.3), ("poisson", 1.5), ("borel", 0.4)]:
    G = SecondaryDistribution(kind, psi) if psi is not None else SecondaryDistribution(kind)
    for kappa in (0.4, 0.9):
        tp = ThinningParams.ingarch11(1.0, kappa, 0.3, 1.0, G=G)
        rep = check_conditions(tp)
        print(f"{str(G):22s} kappa={kappa}  m={offspring_mean(OffspringLaw.from_params(tp)):.3f}  ergodic={rep.geometrically_ergodic}")

# %%
# Pool sizes from both simulators
# -------------------------------
# The branching simulator works on the pool alone; the epidemic simulator
# tracks every compartment. Their pool sizes share one law.
tp = ThinningParams.ingarch11(2.0, 0.5, 0.3, 1.0)
rng = np.random.default_rng(np.random.SeedSequence(12))
r1, r2 = rng.spawn(2)
e_thin = simulate_thinning(tp, 30, r1, reps=20_000).e
e0 = r2.poisson(tp.beta[0] * tp.eta[0], size=20_000)
e_br = simulate_branching(e0, OffspringLaw.from_params(tp), ImmigrationLaw.from_params(tp), 30, r2, reps=20_000)
print("thinning pool mean at t=30: ", e_thin[:, -1].mean())
print("branching pool mean at t=30:", e_br[..., -1].mean())
print("stationary pool mean:       ", e_stationary(tp).mean())
