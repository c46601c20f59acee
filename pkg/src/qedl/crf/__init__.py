"""Linear-chain CRF over characters with BIOES labels."""

from qedl.crf.bioes import LABEL_INDEX, LABELS, bioes_decode, bioes_encode, resolve_overlaps
from qedl.crf.features import (
    BASE_GROUPS,
    DF_BUCKETS,
    FEATURE_GROUPS,
    CharObservation,
    extract_features,
    feature_strings,
)
from qedl.crf.model import (
    CrfModel,
    CrfModelError,
    crf_objective,
    log_partition,
    log_partition_scores,
    objective_function,
    path_score,
    train_crf,
    viterbi,
    viterbi_scores,
)

__all__ = [
    "LABEL_INDEX", "LABELS", "bioes_decode", "bioes_encode", "resolve_overlaps",
    "BASE_GROUPS", "DF_BUCKETS", "FEATURE_GROUPS", "CharObservation",
    "extract_features", "feature_strings",
    "CrfModel", "CrfModelError", "crf_objective", "log_partition",
    "log_partition_scores", "objective_function", "path_score", "train_crf", "viterbi", "viterbi_scores",
]
