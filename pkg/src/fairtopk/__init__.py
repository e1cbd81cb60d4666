"""Group-fairness audits for top-k rankings drawn from finite candidate pools."""

__version__ = "0.1.0"

from .audit import (
    AdjustedAlpha,
    AuditReport,
    BoundaryCurves,
    ConfidenceBand,
    NullZ,
    TestConfig,
    adjust_alpha,
    boundary_curves,
    confidence_band,
    fairness_score,
    multi_test,
    null_z,
    prefix_counts,
    required_samples,
    single_test,
    z_statistic,
)
from .models import (
    CountDistribution,
    DomainError,
    FiniteBinomial,
    Hypergeometric,
    PopulationSpec,
    TargetQuota,
    WeightedHypergeometric,
    cdf,
    count_distribution,
    first_draw_probability,
    odds_ratio_for_target,
    quantile,
    transition_probability,
)
from .rerank import RerankPlan, RerankResult, min_protected_table, rerank
from .sampling import Ranking, SeedSpec, sample_batch, sample_ranking
