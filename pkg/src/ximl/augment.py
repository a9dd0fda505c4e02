"""Counterexample generation from decisive-feature masks.

The decisive region is cut out of the image and then transformed in a
fixed order: scale about the feature centroid, rotate about the centroid,
translate. Parameters are drawn uniformly at random under the constraint
that the transformed feature region fits completely inside the original
frame; draws violating the constraint are rejected and retried.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import ndimage

from .dataset import Image


class EmptyMaskError(ValueError):
    """The decisive-feature mask contains no pixels."""


class FrameFitExhaustedError(RuntimeError):
    """No parameter draw fit the frame; the feature region is oversized.

    Callers may clamp scale_range to <= 1 and retry.
    """


@dataclass(frozen=True)
class AugmentParams:
    scale_range: tuple[float, float] = (0.7, 1.3)
    rotation_range: tuple[float, float] = (-25.0, 25.0)
    # None: translation free within the frame-fit constraint. A pair of
    # (low, high) pairs for (row, col) pins it down, e.g. for tests.
    translation_range: tuple[tuple[float, float], tuple[float, float]] | None = None
    fill: float = 0.0
    max_attempts: int = 100
    # extra interior margin in px, on top of the transform-dependent
    # bilinear reach that the fit check always accounts for
    margin: float = 0.5

    def __post_init__(self) -> None:
        if self.scale_range[0] > self.scale_range[1] or self.scale_range[0] <= 0:
            raise ValueError("scale_range must be a non-empty positive interval")
        if self.rotation_range[0] > self.rotation_range[1]:
            raise ValueError("rotation_range must be non-empty")


@dataclass(frozen=True)
class TransformRecord:
    scale: float
    rotation_deg: float
    translation: tuple[float, float]   # (rows, cols)
    attempts: int


@dataclass(eq=False)
class Counterexample:
    image: Image
    label: int
    provenance: dict[str, Any]


def extract_features(image: np.ndarray, mask: np.ndarray, fill: float = 0.0) -> np.ndarray:
    """Keep masked pixels, replace the rest with the fill value."""
    image = np.asarray(image)
    mask = np.asarray(mask).astype(bool)
    if image.shape != mask.shape:
        raise ValueError(f"image {image.shape} and mask {mask.shape} dimensions differ")
    return np.where(mask, image, np.float32(fill)).astype(np.float32)


def _transformed_bounds(coords: np.ndarray, centroid: np.ndarray, scale: float,
                        angle_deg: float) -> np.ndarray:
    """Feature pixel coords after scale-then-rotate about the centroid."""
    theta = math.radians(angle_deg)
    rot = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    return (coords - centroid) @ (scale * rot).T + centroid


def random_transform(
    features: np.ndarray,
    mask: np.ndarray,
    params: AugmentParams,
    rng: np.random.Generator,
) -> tuple[np.ndarray, TransformRecord]:
    """Scale -> rotate -> translate the feature region, bilinear resampling.

    Rejection-samples parameters (at most max_attempts draws) until the
    transformed feature pixels lie fully inside the frame.
    """
    features = np.asarray(features, dtype=np.float32)
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise EmptyMaskError("no decisive pixels in mask")
    h, w = features.shape
    coords = np.argwhere(mask).astype(np.float64)
    centroid = coords.mean(axis=0)

    for attempt in range(1, params.max_attempts + 1):
        scale = float(rng.uniform(*params.scale_range))
        angle = float(rng.uniform(*params.rotation_range))
        # bilinear interpolation reads up to 1px (per axis) around each mask
        # pixel in input space; under scale+rotation that footprint reaches
        # scale*(|cos|+|sin|) px per output axis beyond the mask coordinates
        theta_r = math.radians(angle)
        reach = scale * (abs(math.cos(theta_r)) + abs(math.sin(theta_r)))
        lo = params.margin + reach
        hi_r, hi_c = h - 1 - params.margin - reach, w - 1 - params.margin - reach
        moved = _transformed_bounds(coords, centroid, scale, angle)
        rmin, cmin = moved.min(axis=0)
        rmax, cmax = moved.max(axis=0)
        if params.translation_range is None:
            # admissible translation keeps the scaled/rotated bbox inside
            t_lo = (lo - rmin, lo - cmin)
            t_hi = (hi_r - rmax, hi_c - cmax)
            if t_lo[0] > t_hi[0] or t_lo[1] > t_hi[1]:
                continue  # cannot fit at this scale/rotation
            tr = float(rng.uniform(t_lo[0], t_hi[0]))
            tc = float(rng.uniform(t_lo[1], t_hi[1]))
        else:
            (r_lo, r_hi), (c_lo, c_hi) = params.translation_range
            tr = float(rng.uniform(r_lo, r_hi))
            tc = float(rng.uniform(c_lo, c_hi))
            if rmin + tr < lo or rmax + tr > hi_r or cmin + tc < lo or cmax + tc > hi_c:
                continue

        # output = input(inverse affine): p_in = R^-1/s (p_out - c - t) + c
        theta = math.radians(angle)
        rot = np.array(
            [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
        )
        inv = rot.T / scale
        offset = centroid - inv @ (centroid + np.array([tr, tc]))
        out = ndimage.affine_transform(
            features, inv, offset=offset, order=1,
            mode="constant", cval=params.fill, output=np.float32,
        )
        record = TransformRecord(
            scale=scale, rotation_deg=angle, translation=(tr, tc), attempts=attempt
        )
        return out, record

    raise FrameFitExhaustedError(
        f"no transform fit the frame after {params.max_attempts} attempts; "
        "the feature region is oversized (consider clamping scale to <= 1)"
    )


def make_counterexamples(
    image: Image,
    mask: np.ndarray,
    label: int,
    count: int,
    params: AugmentParams,
    rng: np.random.Generator,
) -> list[Counterexample]:
    """`count` independent transformed copies of the decisive features."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    mask = np.asarray(mask).astype(bool)
    if not mask.any():
        raise EmptyMaskError("no decisive pixels in mask")
    features = extract_features(image.pixels, mask, params.fill)
    out: list[Counterexample] = []
    for k in range(count):
        transformed, record = random_transform(features, mask, params, rng)
        out.append(
            Counterexample(
                image=Image(
                    pixels=transformed,
                    id=f"{image.id}#cx{k}",
                    source_class=image.source_class,
                ),
                label=label,
                provenance={
                    "source_id": image.id,
                    "scale": record.scale,
                    "rotation_deg": record.rotation_deg,
                    "translation": list(record.translation),
                    "attempts": record.attempts,
                },
            )
        )
    return out
