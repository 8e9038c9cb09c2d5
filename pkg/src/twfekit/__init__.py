"""Two-way fixed-effects estimation for balanced panels, with exact
difference decompositions, gap-restricted and covariate-adjusted
generalizations, causal-weight diagnostics, and cluster-robust inference."""

from .decomposition import (
    EquivalenceReport,
    FdComponent,
    FdDecomposition,
    PairComponent,
    PairwiseDecomposition,
    WeightedSummary,
    count_pairs,
    fd_decomposition,
    pairwise_decomposition,
    verify_equivalence,
    weighted_summary,
)
from .diagnostics import (
    SCENARIOS,
    CausalWeightReport,
    DgpConfig,
    SimulatedPanel,
    Theorem2Audit,
    causal_weights,
    scenario_preset,
    simulate,
    simulate_replication,
    theorem2_audit,
)
from .errors import NoIdentifyingVariation, PanelError
from .estimators import (
    Estimate,
    fd,
    twfe,
    twfe_iv,
    twfe_multivariate,
    twfe_two_period,
    two_way_residual,
)
from .generalized import (
    CovariateSpec,
    GapRange,
    GeneralizedResult,
    PretrendConfig,
    gap_restricted,
    generalized_twfe,
    pretrend_covariate,
)
from .inference import StackedRegression, cluster_robust_se, stack_differences
from .numerics import (
    LeastSquaresFit,
    fwl_residualize,
    ols,
    pairwise_cross_moment,
)
from .panel import (
    BalancedPanel,
    DemeanedSeries,
    DifferencedSeries,
    PanelSchema,
    demean,
    k_difference,
    load_panel,
)

__version__ = "0.1.0"

__all__ = [
    "BalancedPanel",
    "CausalWeightReport",
    "CovariateSpec",
    "DemeanedSeries",
    "DgpConfig",
    "DifferencedSeries",
    "EquivalenceReport",
    "Estimate",
    "FdComponent",
    "FdDecomposition",
    "GapRange",
    "GeneralizedResult",
    "LeastSquaresFit",
    "NoIdentifyingVariation",
    "PairComponent",
    "PairwiseDecomposition",
    "PanelError",
    "PanelSchema",
    "PretrendConfig",
    "SimulatedPanel",
    "StackedRegression",
    "Theorem2Audit",
    "WeightedSummary",
    "causal_weights",
    "cluster_robust_se",
    "count_pairs",
    "demean",
    "fd",
    "fd_decomposition",
    "fwl_residualize",
    "gap_restricted",
    "generalized_twfe",
    "k_difference",
    "load_panel",
    "ols",
    "pairwise_cross_moment",
    "pairwise_decomposition",
    "pretrend_covariate",
    "SCENARIOS",
    "scenario_preset",
    "simulate",
    "simulate_replication",
    "stack_differences",
    "theorem2_audit",
    "twfe",
    "twfe_iv",
    "twfe_multivariate",
    "twfe_two_period",
    "two_way_residual",
    "verify_equivalence",
    "weighted_summary",
]
