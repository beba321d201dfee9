"""quadlab: a computational laboratory for the real quadratic family a - x*x.

Builds first-return towers over the critical point, measures their geometry
and time statistics, bounds capacities under quasisymmetric test classes, and
maps phase-space combinatorics to parameter windows.
"""

__version__ = "0.1.0"

# Bump whenever any serialized artifact or cached payload changes shape.
ENGINE_VERSION = "quadlab-1"

from .errors import QuadlabError  # noqa: F401
from .core import (  # noqa: F401
    DEFAULT_PRECISION,
    evaluate_orbit,
    family,
    invariant_interval,
    orientation_reversing_fixed_point,
    precision_ladder_report,
    solve_monotone_pullback,
)
from .qs import (  # noqa: F401
    CapacityBound,
    GammaSequence,
    IntervalSet,
    QSParameters,
    branch_pullback_bound,
    capacity_bound,
    holder_bounds,
    large_deviation_bound,
    sparse_form,
    stirling_form,
    tail_sum,
    tree_compose,
)
from .nest import (  # noqa: F401
    GapeInterval,
    LandingAddress,
    MarkovPartition,
    NestBudgets,
    NiceInterval,
    NicenessCertificate,
    PrincipalNest,
    RenormStatus,
    RenormalizedMap,
    ReturnBranch,
    build_principal_nest,
    confirm_restrictive_interval,
    detect_renormalization,
    gape_interval,
    landing_address,
    markov_partition,
    renormalize,
    return_branch_at,
)
from .serialize import (  # noqa: F401
    nest_document,
    parse_nest_document,
    read_nest,
    write_nest,
)
from .stats import (  # noqa: F401
    BranchFlags,
    ClassifierConfig,
    ExpansionEstimate,
    HyperbolicityProfile,
    LandingFlags,
    NestStatistics,
    RecurrenceReport,
    TimeDistribution,
    branch_itinerary,
    ce_estimator,
    classify_landing,
    classify_return_branch,
    critical_statistics,
    hyperbolicity_profile,
    recurrence_exponent,
    return_time_distribution,
    sample_branches,
    scaling_sequence,
)
