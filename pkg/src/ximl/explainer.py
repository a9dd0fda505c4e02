"""Local surrogate explanations over superpixels (LIME-style).

An image is reduced to a binary presence vector over its superpixels.
Perturbations flip presence bits; the black-box is queried on the rendered
perturbations and a sparse linear surrogate is fitted by forward stepwise
selection on the proximity-weighted least-squares loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .dataset import Image
from .segmentation import QuickShiftParams, SuperpixelMap, mask_from_segments, quick_shift


class ClassifierHandle(Protocol):
    """Anything that maps a (n, H, W) batch to (n, 2) class probabilities."""

    def predict_proba(self, batch: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ExplainerConfig:
    n_samples: int = 200
    max_features: int = 5
    kernel_width: float = 0.25
    fill: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.n_samples < self.max_features:
            raise ValueError("n_samples must be >= max_features")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be > 0")


@dataclass(eq=False)
class InterpretableInstance:
    """Presence vector over superpixels; the original instance is all-ones."""

    presence: np.ndarray
    segments: SuperpixelMap
    base: Image

    @classmethod
    def original(cls, image: Image, segments: SuperpixelMap) -> "InterpretableInstance":
        return cls(
            presence=np.ones(segments.n_segments, dtype=bool),
            segments=segments,
            base=image,
        )


@dataclass(eq=False)
class Perturbation:
    presence: np.ndarray           # binary vector over superpixels
    image: np.ndarray              # rendered pixels, absent superpixels filled
    proximity: float               # weight in (0, 1], 1 for the original


@dataclass(eq=False)
class Explanation:
    """Sparse linear surrogate: per-superpixel weights plus intercept.

    weights is dense of length n_segments and zero outside `selected`;
    fidelity is the achieved proximity-weighted squared-error loss.
    """

    weights: np.ndarray
    intercept: float
    selected: list[int]
    target_label: int
    fidelity: float


def proximity(presence: np.ndarray, kernel_width: float) -> float:
    """exp(-D^2 / width^2) with D the normalized Hamming distance from all-ones."""
    presence = np.asarray(presence, dtype=bool)
    d = presence.size
    if d < 1:
        raise ValueError("presence vector must be non-empty")
    dist = float(np.count_nonzero(~presence)) / d
    return float(np.exp(-(dist ** 2) / (kernel_width ** 2)))


def render_perturbation(image: np.ndarray, segmap: SuperpixelMap, presence: np.ndarray,
                        fill: float) -> np.ndarray:
    """Rendered pixels: original where the superpixel is present, fill elsewhere."""
    keep = presence[segmap.assignment]
    return np.where(keep, image, np.float32(fill)).astype(np.float32)


def sample_perturbations(instance: InterpretableInstance,
                         config: ExplainerConfig) -> list[Perturbation]:
    """n_samples presence vectors, i.i.d. Bernoulli(0.5), all-ones first."""
    d = instance.segments.n_segments
    rng = np.random.default_rng(config.seed)
    out: list[Perturbation] = []
    for k in range(config.n_samples):
        if k == 0:
            bits = np.ones(d, dtype=bool)
        else:
            bits = rng.random(d) < 0.5
        out.append(
            Perturbation(
                presence=bits,
                image=render_perturbation(instance.base.pixels, instance.segments,
                                          bits, config.fill),
                proximity=proximity(bits, config.kernel_width),
            )
        )
    return out


def _weighted_lstsq(design: np.ndarray, target: np.ndarray,
                    weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve min_b sum_i w_i (y_i - X_i b)^2; returns (b, achieved loss)."""
    sw = np.sqrt(weights)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
    resid = target - design @ coef
    return coef, float(np.sum(weights * resid ** 2))


def fit_surrogate(perturbations: list[Perturbation], f_outputs: np.ndarray,
                  max_features: int, target_label: int = -1) -> Explanation:
    """Forward stepwise selection on the weighted loss, then exact WLS refit."""
    if len(perturbations) < max_features + 1:
        raise ValueError("need at least max_features + 1 perturbation samples")
    y = np.asarray(f_outputs, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("black-box outputs must be finite")
    Z = np.stack([p.presence for p in perturbations]).astype(np.float64)
    w = np.asarray([p.proximity for p in perturbations], dtype=np.float64)
    n, d = Z.shape

    ones = np.ones((n, 1))
    selected: list[int] = []
    remaining = list(range(d))
    while len(selected) < min(max_features, d) and remaining:
        losses = [
            _weighted_lstsq(np.column_stack([ones, Z[:, selected + [j]]]), y, w)[1]
            for j in remaining
        ]
        best = int(np.argmin(losses))  # ties resolve to the lowest feature index
        selected.append(remaining.pop(best))

    # final exact solve; drop collinear columns if the design is rank-deficient
    while True:
        design = np.column_stack([ones, Z[:, selected]])
        sw = np.sqrt(w)
        rank = np.linalg.matrix_rank(design * sw[:, None])
        if rank >= design.shape[1] or not selected:
            break
        dropped = selected.pop()
        warnings.warn(
            f"dropping collinear superpixel feature {dropped} from the surrogate",
            stacklevel=2,
        )
    coef, loss = _weighted_lstsq(np.column_stack([ones, Z[:, selected]]), y, w)

    weights = np.zeros(d, dtype=np.float64)
    weights[selected] = coef[1:]
    return Explanation(
        weights=weights,
        intercept=float(coef[0]),
        selected=list(selected),
        target_label=target_label,
        fidelity=loss,
    )


# Cache for segment maps, keyed by (image id, params); segmentation is by far
# the most expensive stage and depends on the image only.
class SegmentCache:
    def __init__(self, max_entries: int = 512) -> None:
        self._store: dict[tuple[str, QuickShiftParams], SuperpixelMap] = {}
        self._max = max_entries

    def get(self, image: Image, params: QuickShiftParams) -> SuperpixelMap:
        key = (image.id, params)
        hit = self._store.get(key)
        if hit is None:
            hit = quick_shift(image.pixels, params)
            if len(self._store) >= self._max:
                self._store.pop(next(iter(self._store)))
            self._store[key] = hit
        return hit

    def put(self, image: Image, params: QuickShiftParams, segmap: SuperpixelMap) -> None:
        self._store[(image.id, params)] = segmap


def explain(
    model: ClassifierHandle,
    image: Image,
    config: ExplainerConfig,
    segmentation_params: QuickShiftParams | None = None,
    segment_cache: SegmentCache | None = None,
    target_label: int | None = None,
) -> tuple[Explanation, SuperpixelMap]:
    """Segment, perturb, query the black-box, fit the sparse surrogate.

    The surrogate target is the model's probability for the predicted class
    (or `target_label` when given). Deterministic given config.seed.
    """
    params = segmentation_params or QuickShiftParams()
    if segment_cache is not None:
        segmap = segment_cache.get(image, params)
    else:
        segmap = quick_shift(image.pixels, params)
    instance = InterpretableInstance.original(image, segmap)
    perturbations = sample_perturbations(instance, config)
    batch = np.stack([p.image for p in perturbations])
    probs = np.asarray(model.predict_proba(batch))
    if target_label is None:
        target_label = int(np.argmax(probs[0]))  # sample 0 is the original image
    f_outputs = probs[:, target_label]
    explanation = fit_surrogate(perturbations, f_outputs, config.max_features,
                                target_label=target_label)
    return explanation, segmap


def explanation_mask(explanation: Explanation, segments: SuperpixelMap,
                     top_k: int) -> np.ndarray:
    """Union of the top_k selected superpixels with strictly positive weight."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    positive = [i for i in explanation.selected if explanation.weights[i] > 0]
    positive.sort(key=lambda i: -explanation.weights[i])
    chosen = positive[:top_k]
    if not chosen:
        return np.zeros(segments.assignment.shape, dtype=bool)
    return mask_from_segments(segments, chosen)
