"""Cache-enabled clustered D2D network: analysis, optimization, validation.

Devices form a Thomas cluster process and cache files from a Zipf
catalog under a random caching policy. The package computes coverage
probabilities and rates from stochastic geometry, optimizes the caching
vector for offloading gain, energy, and weighted request delay, and
validates every analytic quantity against an internal Monte Carlo
simulator.
"""

from .errors import (
    ClusterCacheError,
    ConfigError,
    ConvexityError,
    InfeasibleAccessProbability,
    InfeasibleLoadError,
    NoStableSplitError,
    NumericFailure,
    UnstableQueueError,
)
from .model import (
    CacheRealization,
    CachingPolicy,
    ContentLibrary,
    NetworkConfig,
    baseline_policy,
    sample_cache_realization,
    zipf_popularity,
)
from .montecarlo import (
    ClusterRealization,
    ConditionalCoveragePair,
    McEstimate,
    mc_coverage_conditional,
    mc_coverage_single_link,
    mc_prob_rate_exceeds,
    sample_tcp,
)
from .optimize import (
    BandwidthAllocation,
    BcdStep,
    BcdTrace,
    KktSolution,
    average_energy,
    energy_conditional,
    objective_offloading,
    optimal_bandwidth,
    optimize_delay_bcd,
    optimize_energy,
    optimize_offloading,
    weighted_delay,
)
from .queueing import (
    DelayModel,
    arrival_rates,
    build_delay_model,
    mean_queue_length,
    mm1_mean_queue_length,
    per_queue_delay,
    service_coefficients,
    service_rate,
)
from .stochgeo import (
    CoverageResult,
    LaplaceArg,
    average_rate,
    bs_coverage,
    d2d_coverage_conditional,
    d2d_coverage_single_link,
    laplace_inter,
    laplace_intra,
    optimal_access_probability,
    prob_rate_exceeds,
    rice_pdf,
    serving_distance_pdf,
)

__version__ = "0.1.0"
