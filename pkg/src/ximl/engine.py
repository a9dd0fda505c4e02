"""Interactive optimization loop: query, predict, explain, correct, refit.

One iteration selects the least-confident unlabeled instance, presents the
prediction with its explanation, ingests the user's correction (RRR, RWR
or W), generates counterexamples from the corrected decisive region, moves
the instance into the labeled pool and retrains from scratch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import classifier
from .augment import AugmentParams, make_counterexamples
from .classifier import Model, ModelConfig
from .dataset import Image, Pools
from .explainer import Explanation, ExplainerConfig, SegmentCache, explain
from .segmentation import QuickShiftParams, SuperpixelMap


class Mode(str, Enum):
    RWR_ONLY = "RWR_ONLY"
    RWR_PLUS_W = "RWR_PLUS_W"


class Outcome(str, Enum):
    RRR = "RRR"   # right prediction, right reasons: absorb as-is
    RWR = "RWR"   # right prediction, wrong reasons: mask correction
    W = "W"       # wrong prediction: label correction (mask too in RWR_PLUS_W)


@dataclass
class Feedback:
    outcome: Outcome
    corrected_label: int | None = None
    corrected_mask: np.ndarray | None = None


@dataclass
class SessionConfig:
    budget: int = 100                       # iteration budget T
    counterexamples: int = 1                # c per correction
    mode: Mode = Mode.RWR_PLUS_W
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    segmentation: QuickShiftParams = field(default_factory=QuickShiftParams)
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentParams = field(default_factory=AugmentParams)
    seed: int = 0
    event_log: Path | None = None
    # optional early-stop quality threshold on the evaluator's accuracy;
    # disabled by default
    min_accuracy: float | None = None

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.counterexamples < 0:
            raise ValueError("counterexamples must be >= 0")


@dataclass
class PendingQuery:
    image: Image
    predicted_label: int
    confidence: float
    explanation: Explanation
    segments: SuperpixelMap


@dataclass
class IterationRecord:
    iteration: int
    instance_id: str | None
    outcome: str | None
    counterexamples: int
    labeled_size: int
    unlabeled_size: int
    metrics: dict[str, Any] = field(default_factory=dict)
    # transform parameters of the generated counterexamples, for audit
    transforms: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        rec = {
            "iteration": self.iteration,
            "instance_id": self.instance_id,
            "outcome": self.outcome,
            "counterexamples": self.counterexamples,
            "labeled_size": self.labeled_size,
            "unlabeled_size": self.unlabeled_size,
        }
        if self.transforms:
            rec["transforms"] = self.transforms
        rec.update(self.metrics)
        return rec


@dataclass
class Trace:
    records: list[IterationRecord]
    stopped_early: bool = False
    stop_reason: str | None = None


class SessionError(RuntimeError):
    """Protocol violation: wrong call order or exhausted budget."""


class FeedbackError(SessionError):
    """Feedback payload inconsistent with the outcome or session mode."""


def select_query(model, unlabeled: list[Image]) -> Image:
    """The instance with the lowest prediction score; ties -> lowest id."""
    if not unlabeled:
        raise SessionError("unlabeled pool is empty")
    batch = np.stack([img.pixels for img in unlabeled])
    scores = np.asarray(model.predict_proba(batch)).max(axis=1)
    best = min(range(len(unlabeled)), key=lambda i: (scores[i], unlabeled[i].id))
    return unlabeled[best]


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


class Session:
    """Mutable loop state; mutated by exactly one actor at a time."""

    def __init__(
        self,
        config: SessionConfig,
        pools: Pools,
        evaluator: Callable[[Model, int], dict[str, Any]] | None = None,
        fit_fn: Callable[[list[tuple[Image, int]], ModelConfig], Model] | None = None,
    ) -> None:
        self.config = config
        self.labeled: list[tuple[Image, int]] = list(pools.labeled)
        self.unlabeled: list[Image] = list(pools.unlabeled)
        self.evaluator = evaluator
        self.fit_fn = fit_fn or classifier.fit
        self.segment_cache = SegmentCache()
        self.iteration = 0
        self.pending: PendingQuery | None = None
        self.history: list[IterationRecord] = []
        self.base_instances_added = 0
        self.counterexamples_added = 0
        self._quality_reached = False

        self.model = self.fit_fn(self.labeled, config.model)
        self.baseline_record = IterationRecord(
            iteration=0,
            instance_id=None,
            outcome=None,
            counterexamples=0,
            labeled_size=len(self.labeled),
            unlabeled_size=len(self.unlabeled),
            metrics=self._evaluate(),
        )
        self._log_event(self.baseline_record)
        self._check_quality(self.baseline_record)

    # -- state inspection ---------------------------------------------------

    @property
    def complete(self) -> bool:
        return (
            self.iteration >= self.config.budget
            or not self.unlabeled
            or self._quality_reached
        )

    def all_records(self) -> list[IterationRecord]:
        return [self.baseline_record, *self.history]

    # -- the loop -----------------------------------------------------------

    def begin_iteration(self) -> PendingQuery:
        if self.pending is not None:
            raise SessionError("a query is already pending; submit feedback first")
        if self.iteration >= self.config.budget:
            raise SessionError("budget exhausted")
        if self._quality_reached:
            raise SessionError("quality threshold reached; session complete")
        if not self.unlabeled:
            raise SessionError("unlabeled pool is empty")
        image = select_query(self.model, self.unlabeled)
        probs = np.asarray(self.model.predict_proba(image.pixels[None]))[0]
        predicted = int(np.argmax(probs))
        seed = _derive_seed(self.config.seed, self.iteration, 0)
        cfg = self.config.explainer
        explanation, segments = explain(
            self.model,
            image,
            ExplainerConfig(
                n_samples=cfg.n_samples,
                max_features=cfg.max_features,
                kernel_width=cfg.kernel_width,
                fill=cfg.fill,
                seed=seed,
            ),
            segmentation_params=self.config.segmentation,
            segment_cache=self.segment_cache,
            target_label=predicted,
        )
        self.pending = PendingQuery(
            image=image,
            predicted_label=predicted,
            confidence=float(probs.max()),
            explanation=explanation,
            segments=segments,
        )
        return self.pending

    def submit_feedback(self, feedback: Feedback) -> IterationRecord:
        if self.pending is None:
            raise SessionError("no pending query")
        self._validate_feedback(feedback)
        pending = self.pending
        image = pending.image

        if feedback.outcome is Outcome.W:
            label = int(feedback.corrected_label)  # type: ignore[arg-type]
        else:
            label = pending.predicted_label

        generate_mask = None
        if feedback.outcome is Outcome.RWR:
            generate_mask = feedback.corrected_mask
        elif feedback.outcome is Outcome.W and self.config.mode is Mode.RWR_PLUS_W:
            generate_mask = feedback.corrected_mask

        counterexamples = []
        if generate_mask is not None and self.config.counterexamples > 0:
            rng = np.random.default_rng(_derive_seed(self.config.seed, self.iteration, 1))
            counterexamples = make_counterexamples(
                image, generate_mask, label, self.config.counterexamples,
                self.config.augment, rng,
            )

        self.labeled.append((image, label))
        self.labeled.extend((cx.image, cx.label) for cx in counterexamples)
        self.unlabeled = [img for img in self.unlabeled if img.id != image.id]
        self.base_instances_added += 1
        self.counterexamples_added += len(counterexamples)

        self.model = self.fit_fn(self.labeled, self.config.model)
        self.iteration += 1
        self.pending = None

        record = IterationRecord(
            iteration=self.iteration,
            instance_id=image.id,
            outcome=feedback.outcome.value,
            counterexamples=len(counterexamples),
            labeled_size=len(self.labeled),
            unlabeled_size=len(self.unlabeled),
            metrics=self._evaluate(),
            transforms=[cx.provenance for cx in counterexamples],
        )
        self.history.append(record)
        self._log_event(record)
        self._check_quality(record)
        return record

    # -- internals ----------------------------------------------------------

    def _validate_feedback(self, feedback: Feedback) -> None:
        out = feedback.outcome
        if out is Outcome.RRR:
            if feedback.corrected_label is not None or feedback.corrected_mask is not None:
                raise FeedbackError("RRR feedback carries no correction fields")
        elif out is Outcome.RWR:
            if feedback.corrected_mask is None:
                raise FeedbackError("RWR feedback requires corrected_mask")
            if feedback.corrected_label is not None:
                raise FeedbackError("RWR feedback must not carry corrected_label")
        elif out is Outcome.W:
            if feedback.corrected_label is None:
                raise FeedbackError("W feedback requires corrected_label")
            if feedback.corrected_label not in (0, 1):
                raise FeedbackError("corrected_label must be 0 or 1")
            if self.config.mode is Mode.RWR_PLUS_W and feedback.corrected_mask is None:
                raise FeedbackError("W feedback requires corrected_mask in RWR_PLUS_W mode")
            # a mask on W in RWR_ONLY mode is tolerated and ignored: the
            # simulated oracle always attaches the true mask to W answers
        else:  # pragma: no cover - enum is closed
            raise FeedbackError(f"unknown outcome {out!r}")

    def _evaluate(self) -> dict[str, Any]:
        if self.evaluator is None:
            return {}
        return dict(self.evaluator(self.model, self.iteration))

    def _check_quality(self, record: IterationRecord) -> None:
        if self.config.min_accuracy is None:
            return
        acc = record.metrics.get("accuracy")
        if acc is not None and acc >= self.config.min_accuracy:
            self._quality_reached = True

    def _log_event(self, record: IterationRecord) -> None:
        if self.config.event_log is None:
            return
        path = Path(self.config.event_log)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_json()) + "\n")


def run_with_oracle(
    config: SessionConfig,
    pools: Pools,
    oracle,
    evaluator: Callable[[Model, int], dict[str, Any]] | None = None,
    fit_fn: Callable[[list[tuple[Image, int]], ModelConfig], Model] | None = None,
) -> tuple[Model, Trace]:
    """Drive the loop for the full budget with a simulated user.

    No early stop other than pool exhaustion (flagged) or the optional
    quality threshold. The oracle must answer every query: it is called as
    oracle.answer(instance_id, predicted_label, explanation_mask).
    """
    from .explainer import explanation_mask  # local import to avoid cycle noise

    session = Session(config, pools, evaluator=evaluator, fit_fn=fit_fn)
    stopped_early = False
    reason = None
    while session.iteration < config.budget:
        if session._quality_reached:
            stopped_early = True
            reason = "quality threshold reached"
            break
        if not session.unlabeled:
            stopped_early = True
            reason = "unlabeled pool exhausted"
            break
        pending = session.begin_iteration()
        mask = explanation_mask(
            pending.explanation, pending.segments, config.explainer.max_features
        )
        feedback = oracle.answer(pending.image.id, pending.predicted_label, mask)
        session.submit_feedback(feedback)
    return session.model, Trace(
        records=session.all_records(),
        stopped_early=stopped_early,
        stop_reason=reason,
    )
