"""Client-level watermark attribution through secure aggregation: simulator and verification harness."""
from .attribution import (AttributionReport, ScoreTrace, decide, log10_p, p_value, stouffer,
                          stouffer_error_bounds, tpr_fpr)
from .config import BigramParams, ExperimentConfig, SyntheticParams, load_config
from .errors import (AuthorizationError, ConfigError, DegenerateError, DimensionError, EmptyCorpus,
                     FedAttrError, InsufficientSamples, NoParticipation, RetryLimitExceeded, SubsetSizeError,
                     ThresholdInfeasible, UnknownClient, WeightSumError)
from .estimator import (QueryDesign, acceptance_threshold, estimate_update, expected_masking_strength,
                        propose_design, rejection_check, sample_accepted_design, variance_bound, variance_factor)
from .privacy import LeakageAssessment, mi_bound, mi_estimate_mc, mi_gaussian_exact
from .protocol import ProtocolConfig, aggregate, validate_config
from .sa import RoundVault, query_budget, subset_sum
from .scoring import (ScoreContext, SyntheticScoreSpec, differential_score, direct_score, kgw_score,
                      synth_score)
from .simulation import RunResult, run_attribution
from .updates import (BigramModel, GreenListKey, SyntheticUpdateSpec, gen_corpus, green_list, synth_updates,
                      train_local)

__version__ = "0.1.0"

__all__ = [
    "acceptance_threshold",
    "aggregate",
    "AttributionReport",
    "AuthorizationError",
    "BigramModel",
    "BigramParams",
    "ConfigError",
    "decide",
    "DegenerateError",
    "differential_score",
    "DimensionError",
    "direct_score",
    "EmptyCorpus",
    "estimate_update",
    "expected_masking_strength",
    "ExperimentConfig",
    "FedAttrError",
    "gen_corpus",
    "green_list",
    "GreenListKey",
    "InsufficientSamples",
    "kgw_score",
    "LeakageAssessment",
    "load_config",
    "log10_p",
    "mi_bound",
    "mi_estimate_mc",
    "mi_gaussian_exact",
    "NoParticipation",
    "p_value",
    "propose_design",
    "ProtocolConfig",
    "query_budget",
    "QueryDesign",
    "rejection_check",
    "RetryLimitExceeded",
    "RoundVault",
    "run_attribution",
    "RunResult",
    "sample_accepted_design",
    "ScoreContext",
    "ScoreTrace",
    "stouffer",
    "stouffer_error_bounds",
    "subset_sum",
    "SubsetSizeError",
    "synth_score",
    "synth_updates",
    "SyntheticParams",
    "SyntheticScoreSpec",
    "SyntheticUpdateSpec",
    "ThresholdInfeasible",
    "tpr_fpr",
    "train_local",
    "UnknownClient",
    "validate_config",
    "variance_bound",
    "variance_factor",
    "WeightSumError",
]
