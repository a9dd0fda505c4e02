"""Explainable interactive image-classification workbench."""

__version__ = "0.1.0"

from .augment import AugmentParams, Counterexample, make_counterexamples
from .classifier import Model, ModelConfig, fit, predict_proba, prediction_score
from .dataset import (
    Dataset,
    GroundTruthMask,
    Image,
    Pools,
    derive_ground_truth_mask,
    load_dataset,
    make_synthetic_dataset,
    split_pools,
)
from .engine import (
    Feedback,
    Mode,
    Outcome,
    Session,
    SessionConfig,
    run_with_oracle,
    select_query,
)
from .evaluation import (
    ExperimentConfig,
    SimulatedOracle,
    accuracy,
    avg_nonzero_explanation_score,
    iou,
    run_experiment,
    train_baseline,
)
from .explainer import (
    Explanation,
    ExplainerConfig,
    InterpretableInstance,
    explain,
    explanation_mask,
    fit_surrogate,
    proximity,
    sample_perturbations,
)
from .segmentation import (
    QuickShiftParams,
    SuperpixelMap,
    mask_from_segments,
    quick_shift,
    segments_touching_mask,
)

__all__ = [
    "AugmentParams",
    "Counterexample",
    "Dataset",
    "ExperimentConfig",
    "ExplainerConfig",
    "Explanation",
    "Feedback",
    "GroundTruthMask",
    "Image",
    "InterpretableInstance",
    "Mode",
    "Model",
    "ModelConfig",
    "Outcome",
    "Pools",
    "QuickShiftParams",
    "Session",
    "SessionConfig",
    "SimulatedOracle",
    "SuperpixelMap",
    "accuracy",
    "avg_nonzero_explanation_score",
    "derive_ground_truth_mask",
    "explain",
    "explanation_mask",
    "fit",
    "fit_surrogate",
    "iou",
    "load_dataset",
    "make_counterexamples",
    "make_synthetic_dataset",
    "mask_from_segments",
    "predict_proba",
    "prediction_score",
    "proximity",
    "quick_shift",
    "run_experiment",
    "run_with_oracle",
    "sample_perturbations",
    "segments_touching_mask",
    "select_query",
    "split_pools",
    "train_baseline",
]
