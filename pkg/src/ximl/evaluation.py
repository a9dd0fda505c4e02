"""Metrics, the simulated oracle, and the experiment grid runner.

The oracle stands in for the human: it answers W for wrong predictions
(with the true label and true mask), RRR when the explanation overlaps the
true mask well enough (IoU >= threshold), and RWR with the true mask
otherwise. The grid runner reproduces the max-accuracy and
max-explanation-score tables over modes x counterexample counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import classifier
from .augment import AugmentParams
from .classifier import Model, ModelConfig
from .dataset import (
    Dataset,
    GroundTruthMask,
    Image,
    Pools,
    derive_ground_truth_mask,
    load_cache,
    load_dataset,
    make_synthetic_dataset,
    split_pools,
)
from .engine import Feedback, Mode, Outcome, SessionConfig, Trace, run_with_oracle
from .explainer import ExplainerConfig, SegmentCache, explain, explanation_mask
from .segmentation import QuickShiftParams


def accuracy(model, test: list[tuple[Image, int]]) -> float:
    """Fraction of correct predictions on the test pool."""
    if not test:
        raise ValueError("test set is empty")
    batch = np.stack([img.pixels for img, _ in test])
    labels = np.asarray([lab for _, lab in test])
    preds = np.asarray(model.predict_proba(batch)).argmax(axis=1)
    return float((preds == labels).mean())


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two binary masks."""
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        raise ValueError("IoU undefined: both masks are empty")
    return float(np.count_nonzero(a & b) / union)


@dataclass
class ExplanationScore:
    """Average IoU (x100) over correctly predicted instances with IoU > 0.

    value is None when no instance qualifies (flagged-empty, not zero).
    """

    value: float | None
    counted: int
    correct: int
    evaluated: int


def avg_nonzero_explanation_score(
    model,
    explainer_config: ExplainerConfig,
    segmentation_params: QuickShiftParams,
    expl_test: list[tuple[Image, int, GroundTruthMask]],
    segment_cache: SegmentCache | None = None,
    seed: int = 0,
) -> ExplanationScore:
    """Score per the exclusion rule: wrong predictions and IoU == 0 excluded."""
    if not expl_test:
        raise ValueError("explanation test set is empty")
    cache = segment_cache if segment_cache is not None else SegmentCache()
    batch = np.stack([img.pixels for img, _, _ in expl_test])
    preds = np.asarray(model.predict_proba(batch)).argmax(axis=1)

    scores: list[float] = []
    correct = 0
    for idx, (img, label, truth) in enumerate(expl_test):
        if int(preds[idx]) != label:
            continue
        correct += 1
        cfg = replace(
            explainer_config,
            seed=int(np.random.SeedSequence([seed, idx]).generate_state(1)[0]),
        )
        explanation, segmap = explain(
            model, img, cfg, segmentation_params=segmentation_params,
            segment_cache=cache, target_label=int(preds[idx]),
        )
        mask = explanation_mask(explanation, segmap, explainer_config.max_features)
        if not mask.any() or not truth.mask.any():
            continue
        value = iou(mask, truth.mask)
        if value > 0:
            scores.append(value)
    return ExplanationScore(
        value=float(np.mean(scores)) * 100.0 if scores else None,
        counted=len(scores),
        correct=correct,
        evaluated=len(expl_test),
    )


@dataclass
class SimulatedOracle:
    """Automated user: truth labels plus proxy ground-truth masks."""

    truth: dict[str, tuple[int, GroundTruthMask | None]]
    iou_threshold: float = 0.3
    images: dict[str, Image] = field(default_factory=dict, repr=False)
    mask_threshold: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must lie in [0, 1]")

    @classmethod
    def from_dataset(cls, dataset: Dataset, iou_threshold: float = 0.3,
                     mask_threshold: float = 0.1) -> "SimulatedOracle":
        truth: dict[str, tuple[int, GroundTruthMask | None]] = {
            img.id: (int(lab), None) for img, lab in zip(dataset.images, dataset.labels)
        }
        return cls(
            truth=truth,
            iou_threshold=iou_threshold,
            images={img.id: img for img in dataset.images},
            mask_threshold=mask_threshold,
        )

    def _lookup(self, instance_id: str) -> tuple[int, GroundTruthMask]:
        if instance_id not in self.truth:
            raise KeyError(f"unknown instance {instance_id!r}")
        label, mask = self.truth[instance_id]
        if mask is None:
            mask = derive_ground_truth_mask(self.images[instance_id], self.mask_threshold)
            self.truth[instance_id] = (label, mask)
        return label, mask

    def answer(self, instance_id: str, predicted_label: int,
               explanation_mask: np.ndarray) -> Feedback:
        """W for wrong label; else RRR iff IoU >= threshold, otherwise RWR."""
        label, truth = self._lookup(instance_id)
        if predicted_label != label:
            return Feedback(Outcome.W, corrected_label=label, corrected_mask=truth.mask)
        explanation_mask = np.asarray(explanation_mask).astype(bool)
        if explanation_mask.any() and truth.mask.any():
            quality = iou(explanation_mask, truth.mask)
        else:
            quality = 0.0
        if quality >= self.iou_threshold:
            return Feedback(Outcome.RRR)
        return Feedback(Outcome.RWR, corrected_mask=truth.mask)


class Evaluator:
    """Per-iteration metric hook handed to the session engine.

    accuracy_every / explanation_every thin the evaluation schedule (0
    disables); explanation_subset caps how many explanation-test instances
    are scored per evaluation. Iteration 0 and the final iteration are
    always evaluated when the metric is enabled.
    """

    def __init__(
        self,
        test: list[tuple[Image, int]],
        expl_test: list[tuple[Image, int, GroundTruthMask]] | None,
        explainer_config: ExplainerConfig,
        segmentation_params: QuickShiftParams,
        budget: int,
        accuracy_every: int = 1,
        explanation_every: int = 1,
        explanation_subset: int | None = None,
        seed: int = 0,
    ) -> None:
        self.test = test
        self.expl_test = expl_test or []
        self.explainer_config = explainer_config
        self.segmentation_params = segmentation_params
        self.budget = budget
        self.accuracy_every = accuracy_every
        self.explanation_every = explanation_every
        self.explanation_subset = explanation_subset
        self.seed = seed
        self.segment_cache = SegmentCache(max_entries=len(self.expl_test) + 64)

    def _due(self, every: int, iteration: int) -> bool:
        if every <= 0:
            return False
        return iteration % every == 0 or iteration == self.budget

    def __call__(self, model: Model, iteration: int) -> dict[str, Any]:
        metrics: dict[str, Any] = {"accuracy": None, "explanation_score": None}
        if self.test and self._due(self.accuracy_every, iteration):
            metrics["accuracy"] = accuracy(model, self.test)
        if self.expl_test and self._due(self.explanation_every, iteration):
            subset = self.expl_test
            if self.explanation_subset is not None:
                subset = subset[: self.explanation_subset]
            score = avg_nonzero_explanation_score(
                model, self.explainer_config, self.segmentation_params, subset,
                segment_cache=self.segment_cache, seed=self.seed,
            )
            metrics["explanation_score"] = score.value
            metrics["explanation_counted"] = score.counted
            metrics["explanation_correct"] = score.correct
        return metrics


@dataclass
class EvalOptions:
    accuracy_every: int = 1
    explanation_every: int = 1
    explanation_subset: int | None = None


@dataclass
class ExperimentConfig:
    """Full grid specification; see README for the config-file schema."""

    name: str = "experiment"
    dataset_kind: str = "synthetic"            # idx | image_folder | cache | synthetic
    dataset_path: str | None = None
    classes: tuple[str, str] = ("cross", "ring")
    n_per_class: int = 400                     # synthetic only
    split_seed: int = 7
    l0_size: int = 100
    test_size: int = 200
    expl_test_size: int = 40
    mask_threshold: float = 0.1
    modes: tuple[str, ...] = ("RWR_ONLY", "RWR_PLUS_W")
    counterexample_counts: tuple[int, ...] = (0, 1, 3, 5)
    budget: int = 100
    seed: int = 7
    iou_threshold: float = 0.3
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    segmentation: QuickShiftParams = field(default_factory=QuickShiftParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentParams = field(default_factory=AugmentParams)
    evaluation: EvalOptions = field(default_factory=EvalOptions)


def load_experiment_dataset(config: ExperimentConfig) -> Dataset:
    kind = config.dataset_kind
    if kind == "synthetic":
        return make_synthetic_dataset(config.n_per_class, seed=config.split_seed)
    if kind == "cache":
        if config.dataset_path is None:
            raise ValueError("dataset_path required for cache datasets")
        return load_cache(config.dataset_path)
    if kind in ("idx", "image_folder"):
        if config.dataset_path is None:
            raise ValueError(f"dataset_path required for {kind} datasets")
        return load_dataset(config.dataset_path, kind, config.classes)
    raise ValueError(f"unknown dataset kind {kind!r}")


@dataclass
class CellResult:
    mode: str
    counterexamples: int
    max_accuracy: float | None
    max_explanation_score: float | None
    base_labels_used: int
    final_labeled_size: int
    counterexamples_generated: int
    outcome_counts: dict[str, int]
    stopped_early: bool
    trace: Trace


@dataclass
class ExperimentResult:
    name: str
    dataset: str
    cells: list[CellResult]


def _cell_seed(seed: int, mode: str, c: int) -> int:
    mode_idx = list(Mode).index(Mode(mode))
    return int(np.random.SeedSequence([seed, mode_idx, c]).generate_state(1)[0])


def run_cell(config: ExperimentConfig, pools: Pools, oracle: SimulatedOracle,
             mode: str, c: int) -> CellResult:
    cell_seed = _cell_seed(config.seed, mode, c)
    evaluator = Evaluator(
        test=pools.test,
        expl_test=pools.expl_test,
        explainer_config=config.explainer,
        segmentation_params=config.segmentation,
        budget=config.budget,
        accuracy_every=config.evaluation.accuracy_every,
        explanation_every=config.evaluation.explanation_every,
        explanation_subset=config.evaluation.explanation_subset,
        seed=cell_seed,
    )
    session_config = SessionConfig(
        budget=config.budget,
        counterexamples=c,
        mode=Mode(mode),
        explainer=config.explainer,
        segmentation=config.segmentation,
        model=config.model,
        augment=config.augment,
        seed=cell_seed,
    )
    _, trace = run_with_oracle(session_config, pools, oracle, evaluator=evaluator)

    accuracies = [r.metrics.get("accuracy") for r in trace.records]
    accuracies = [a for a in accuracies if a is not None]
    scores = [r.metrics.get("explanation_score") for r in trace.records]
    scores = [s for s in scores if s is not None]
    outcome_counts: dict[str, int] = {o.value: 0 for o in Outcome}
    for rec in trace.records:
        if rec.outcome is not None:
            outcome_counts[rec.outcome] += 1
    base_labels = len(pools.labeled) + sum(
        1 for rec in trace.records if rec.instance_id is not None
    )
    final_sizes = trace.records[-1]
    return CellResult(
        mode=mode,
        counterexamples=c,
        max_accuracy=max(accuracies) if accuracies else None,
        max_explanation_score=max(scores) if scores else None,
        base_labels_used=base_labels,
        final_labeled_size=final_sizes.labeled_size,
        counterexamples_generated=sum(r.counterexamples for r in trace.records),
        outcome_counts=outcome_counts,
        stopped_early=trace.stopped_early,
        trace=trace,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run the full modes x counterexample-counts grid on one dataset."""
    dataset = load_experiment_dataset(config)
    pools = split_pools(
        dataset,
        seed=config.split_seed,
        l0_size=config.l0_size,
        test_size=config.test_size,
        expl_test_size=config.expl_test_size,
        mask_threshold=config.mask_threshold,
    )
    oracle = SimulatedOracle.from_dataset(
        dataset, iou_threshold=config.iou_threshold,
        mask_threshold=config.mask_threshold,
    )
    cells = [
        run_cell(config, pools, oracle, mode, c)
        for mode in config.modes
        for c in config.counterexample_counts
    ]
    return ExperimentResult(name=config.name, dataset=config.dataset_kind, cells=cells)


@dataclass
class BaselineResult:
    accuracy: float
    n_train: int
    n_test: int
    caipi_base_labels: int            # l0 + budget: labels a session consumes
    caipi_max_instances: int          # plus the c-per-iteration counterexamples
    label_reduction: float            # 1 - base_labels / n_train
    train_log: list[float]


def train_baseline(
    dataset: Dataset,
    n_train: int,
    n_test: int,
    model_config: ModelConfig,
    seed: int = 7,
    caipi_l0: int = 100,
    caipi_budget: int = 100,
    caipi_counterexamples: int = 1,
) -> BaselineResult:
    """Conventional training run plus the labeling-effort comparison."""
    if n_train + n_test > len(dataset):
        raise ValueError(
            f"insufficient data: need {n_train + n_test}, have {len(dataset)}"
        )
    pools = split_pools(dataset, seed=seed, l0_size=n_train, test_size=n_test,
                        expl_test_size=0)
    model = classifier.fit(pools.labeled, model_config)
    acc = accuracy(model, pools.test)
    base_labels = caipi_l0 + caipi_budget
    return BaselineResult(
        accuracy=acc,
        n_train=n_train,
        n_test=n_test,
        caipi_base_labels=base_labels,
        caipi_max_instances=base_labels + caipi_counterexamples * caipi_budget,
        label_reduction=1.0 - base_labels / n_train,
        train_log=model.train_log,
    )
