"""Class balancing by effective sample size: losses, data tools, trainer, harness."""

from cbloss.covering import CoveringConfig, CoveringResult, expected_volume, simulate_covering
from cbloss.effnum import (
    ClassCounts,
    EffNumParams,
    WeightVector,
    beta_from_prototypes,
    class_balanced_weights,
    effective_number,
    effective_number_recursive,
    prototypes_from_beta,
)
from cbloss.longtail import (
    Dataset,
    LongTailProfile,
    SyntheticDataSpec,
    build_profile,
    generate_synthetic,
    imbalance_factor,
    ingest_csv,
    mu_from_imbalance,
    subsample_to_profile,
)
from cbloss.losses import (
    ClassBalance,
    LossOutput,
    LossSpec,
    cb_focal_alpha_equivalence_check,
    class_balanced,
    focal,
    sigmoid_ce,
    softmax_ce,
    softmax_probs,
    transform_zt,
)
from cbloss.trainer import RunRecord, TrainConfig, evaluate, init_model, lr_at, train

__all__ = [
    "ClassBalance",
    "ClassCounts",
    "CoveringConfig",
    "CoveringResult",
    "Dataset",
    "EffNumParams",
    "LongTailProfile",
    "LossOutput",
    "LossSpec",
    "RunRecord",
    "SyntheticDataSpec",
    "TrainConfig",
    "WeightVector",
    "beta_from_prototypes",
    "build_profile",
    "cb_focal_alpha_equivalence_check",
    "class_balanced",
    "class_balanced_weights",
    "effective_number",
    "effective_number_recursive",
    "evaluate",
    "expected_volume",
    "focal",
    "generate_synthetic",
    "imbalance_factor",
    "ingest_csv",
    "init_model",
    "lr_at",
    "mu_from_imbalance",
    "prototypes_from_beta",
    "sigmoid_ce",
    "simulate_covering",
    "softmax_ce",
    "softmax_probs",
    "subsample_to_profile",
    "train",
    "transform_zt",
]

__version__ = "0.1.0"
