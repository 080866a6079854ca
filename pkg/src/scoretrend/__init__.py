"""Latent Gaussian-process trend analysis for two-team match score differences.

Fits a latent Gaussian process to the running away-minus-home score
difference of a match, computes the joint posterior of the process and its
first two time derivatives, and derives from it the Trend Direction Index
(pointwise probability of an increasing trend) and the Excitement Trend
Index (expected number of monotonicity changes over the match).  Season
utilities aggregate per-match excitement into distribution summaries, team
tables, and a grouping of teams by cross-validated partitioning.
"""

from .config import RunConfig, config_from_dict, load_config
from .errors import (
    ChainDiverged,
    DegenerateCorrelation,
    EmptyAfterTruncation,
    FactorizationFailure,
    InsufficientData,
    MissingBundle,
    NonMonotoneScores,
    OptimizerDiverged,
    ScoreTrendError,
    UnsupportedOrder,
)
from .indices import (
    CrossingIntensityTerms,
    IndexPosteriorSummary,
    TrendIndices,
    crossing_terms,
    default_grid,
    deti_at,
    summarize_over_chain,
    summary_to_dict,
    tdi_at,
    trend_indices,
)
from .inference import (
    ChainDiagnostics,
    HyperChain,
    McmcSettings,
    MleSettings,
    PriorSpec,
    effective_sample_size,
    fit_mle,
    marginal_loglik,
    prior_logpdf,
    prior_logpdf_components,
    sample_hyper_posterior,
    split_rhat,
)
from .ingest import (
    ScoreSeries,
    parse_play_by_play,
    read_matches_csv,
    read_series_json,
    series_from_dict,
    series_to_dict,
    validate_series,
    write_series_json,
)
from .kernel import Hyperparams, gram, mean_fn, se_cov, se_cov_partial
from .posterior import (
    PosteriorMoments,
    moments_to_dict,
    posterior_moments,
    sample_joint_paths,
)
from .season import (
    ClusterResult,
    MatchEtiRecord,
    Partition,
    SeasonStats,
    TeamSummary,
    analyze_match,
    cluster_teams,
    loo_rmsep,
    rank_teams,
    run_season,
    season_stats,
    team_table,
)
from .simulate import draw_score_series, simulate_play_by_play, simulated_series

__version__ = "0.1.0"

__all__ = [
    "ChainDiagnostics",
    "ChainDiverged",
    "ClusterResult",
    "CrossingIntensityTerms",
    "DegenerateCorrelation",
    "EmptyAfterTruncation",
    "FactorizationFailure",
    "HyperChain",
    "Hyperparams",
    "IndexPosteriorSummary",
    "InsufficientData",
    "MatchEtiRecord",
    "McmcSettings",
    "MissingBundle",
    "MleSettings",
    "NonMonotoneScores",
    "OptimizerDiverged",
    "Partition",
    "PosteriorMoments",
    "PriorSpec",
    "RunConfig",
    "ScoreSeries",
    "ScoreTrendError",
    "SeasonStats",
    "TeamSummary",
    "TrendIndices",
    "UnsupportedOrder",
    "analyze_match",
    "cluster_teams",
    "config_from_dict",
    "crossing_terms",
    "default_grid",
    "deti_at",
    "draw_score_series",
    "effective_sample_size",
    "fit_mle",
    "gram",
    "load_config",
    "loo_rmsep",
    "marginal_loglik",
    "mean_fn",
    "moments_to_dict",
    "parse_play_by_play",
    "posterior_moments",
    "prior_logpdf",
    "prior_logpdf_components",
    "rank_teams",
    "read_matches_csv",
    "read_series_json",
    "run_season",
    "sample_hyper_posterior",
    "sample_joint_paths",
    "se_cov",
    "se_cov_partial",
    "season_stats",
    "series_from_dict",
    "series_to_dict",
    "simulate_play_by_play",
    "simulated_series",
    "split_rhat",
    "summarize_over_chain",
    "summary_to_dict",
    "tdi_at",
    "team_table",
    "trend_indices",
    "validate_series",
    "write_series_json",
]
