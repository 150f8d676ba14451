"""Adoption-probability prediction in evolving social networks."""

from .baselines import (
    CrossValidatedKnn,
    ExponentialNaiveBayes,
    InfluenceProbTable,
    LocallyWeightedNaiveBayes,
    cascade_predict,
    cascade_predict_block,
    ip_predict,
    ip_predict_block,
    learn_influence_probs,
)
from .estimator import LocalEmNaiveBayes
from .evaluation import (
    METHODS,
    EvalConfig,
    EvalReport,
    auc,
    predict_week,
    run_rolling_eval,
    wilcoxon_signed_ranks,
)
from .inference import InferenceConfig, infer_probability, posterior_given_h, sample_hidden
from .learner import (
    ModelParams,
    WeightContext,
    compute_weight_context,
    em_update,
    expected_weighted_loglik,
    fit_lemnb,
    init_hidden,
    init_observed,
)
from .network import Dataset, IngestError, NetworkSnapshot, ValidationError, ingest_events
from .powers import (
    EUCLIDEAN,
    MIXED_MEAN,
    NormalizationBounds,
    PairPowers,
    compute_bounds,
    connectedness,
    entity_distance,
    equivalence_power,
    influence_power,
    pair_powers,
    similarity_power,
    structural_distance,
    total_powers,
)
from .synth import SynthConfig, generate
from .training import PowerRecord, TrainingSet, construct_train

__version__ = "0.1.0"

__all__ = [
    "CrossValidatedKnn",
    "Dataset",
    "EUCLIDEAN",
    "EvalConfig",
    "EvalReport",
    "ExponentialNaiveBayes",
    "InferenceConfig",
    "InfluenceProbTable",
    "IngestError",
    "LocalEmNaiveBayes",
    "LocallyWeightedNaiveBayes",
    "METHODS",
    "MIXED_MEAN",
    "ModelParams",
    "NetworkSnapshot",
    "NormalizationBounds",
    "PairPowers",
    "PowerRecord",
    "SynthConfig",
    "TrainingSet",
    "ValidationError",
    "WeightContext",
    "auc",
    "cascade_predict",
    "cascade_predict_block",
    "compute_bounds",
    "compute_weight_context",
    "connectedness",
    "construct_train",
    "em_update",
    "entity_distance",
    "equivalence_power",
    "expected_weighted_loglik",
    "fit_lemnb",
    "generate",
    "infer_probability",
    "influence_power",
    "ingest_events",
    "init_hidden",
    "init_observed",
    "ip_predict",
    "ip_predict_block",
    "learn_influence_probs",
    "pair_powers",
    "posterior_given_h",
    "predict_week",
    "run_rolling_eval",
    "sample_hidden",
    "similarity_power",
    "structural_distance",
    "total_powers",
    "wilcoxon_signed_ranks",
]
