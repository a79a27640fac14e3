"""
INGARCH and compound Poisson INGARCH count time series in classical and
thinning (stochastic epidemic) form, with a branching-process view of the
exposed pool and truncated-kernel stationary distributions.
"""

from .branching import (
    BranchingReport,
    ImmigrationLaw,
    OffspringLaw,
    check_conditions,
    immigration_pmf,
    offspring_mean,
    offspring_pmf,
    simulate_branching,
)
from .classical import (
    ClassicalParams,
    ClassicalPath,
    ClassicalState,
    conditional_pmf_x,
    lambda_next,
    simulate_classical,
    stationary_mean,
)
from .distributions import (
    UNIT,
    SecondaryDistribution,
    TruncatedPMF,
    moments,
    pmf,
    pmf_vector,
    sample,
)
from .epidemic import (
    EpidemicPath,
    ThinningParams,
    iter_counts,
    latent_period_pmf,
    map_to_classical,
    map_to_thinning,
    pool_occupancy,
    simulate_thinning,
)
from .errors import (
    NonConvergenceWarning,
    ParameterError,
    RefusalError,
    RepresentationError,
    TruncationError,
)
from .stationary import (
    StationaryResult,
    StationarySettings,
    e_stationary,
    e_transition_row,
    inarch1_stationary,
    x_given_e_pmf,
    x_stationary,
)
from .thinning import binomial_thin, compound_thin, multinomial_split, poisson_thin

__version__ = "0.1.0"
