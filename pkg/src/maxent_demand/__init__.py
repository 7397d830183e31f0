"""Maximum-entropy model of daily consumption under metered plans."""

from .counterfactual import EtaBounds, PlanValue, eta_bounds, eta_lower_bound, evaluate_plan, rank_plans
from .experiment import EstimatorStats, ExperimentConfig, run_finite_sample_experiment
from .io import CorpusFormatError, ingest_csv, load_config, write_corpus_csv
from .likelihood import FitConfig, FitResult, compute_scales, fit, nll
from .model import (
    INFINITE_PRICE,
    ConsumptionPath,
    ConsumptionStep,
    FeatureScales,
    PlanSpec,
    PriorParams,
    RewardParams,
    features,
    reward,
    transition,
)
from .partition import ZParts, posterior_feature_expectation, z_closed_form, z_quadrature
from .posterior import PosteriorAction, posterior_at, sample_action, simulate_corpus, simulate_cycle

__all__ = [
    "INFINITE_PRICE",
    "ConsumptionPath",
    "ConsumptionStep",
    "CorpusFormatError",
    "EstimatorStats",
    "EtaBounds",
    "ExperimentConfig",
    "FeatureScales",
    "FitConfig",
    "FitResult",
    "PlanSpec",
    "PlanValue",
    "PosteriorAction",
    "PriorParams",
    "RewardParams",
    "ZParts",
    "compute_scales",
    "eta_bounds",
    "eta_lower_bound",
    "evaluate_plan",
    "features",
    "fit",
    "ingest_csv",
    "load_config",
    "nll",
    "posterior_at",
    "posterior_feature_expectation",
    "rank_plans",
    "reward",
    "run_finite_sample_experiment",
    "sample_action",
    "simulate_corpus",
    "simulate_cycle",
    "transition",
    "write_corpus_csv",
    "z_closed_form",
    "z_quadrature",
]
