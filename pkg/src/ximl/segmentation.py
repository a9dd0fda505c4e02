"""Quick Shift superpixel segmentation.

Mode-seeking on a joint spatial/intensity embedding: every pixel gets a
Parzen density estimate (unnormalized Gaussian kernel sums over all
pixels), then links to its nearest neighbor in feature space that has
strictly higher density and lies within max_dist. Link-free pixels are
roots; the trees are the segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Intensity is mapped to the 8-bit range before the ratio weighting so a
# kernel_size/max_dist expressed in pixels is meaningful for both axes of
# the embedding (pixels are stored in [0, 1]).
INTENSITY_SCALE = 255.0


@dataclass(frozen=True)
class QuickShiftParams:
    """kernel_size: density bandwidth (px). max_dist: max link length.
    ratio: intensity-vs-spatial weight in [0, 1]. seed is reserved for
    stochastic smoothing variants and unused by the deterministic core."""

    kernel_size: float = 1.0
    max_dist: float = 4.0
    ratio: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kernel_size <= 0:
            raise ValueError("kernel_size must be > 0")
        if self.max_dist <= 0:
            raise ValueError("max_dist must be > 0")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("ratio must lie in [0, 1]")


@dataclass(eq=False)
class SuperpixelMap:
    """Per-pixel segment ids, contiguous in 0..n_segments-1."""

    assignment: np.ndarray
    n_segments: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.assignment.shape  # type: ignore[return-value]


def pixel_features(image: np.ndarray, ratio: float) -> np.ndarray:
    """Embed pixels as ((1-ratio)*row, (1-ratio)*col, ratio*255*value)."""
    h, w = image.shape
    rr, cc = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    return np.stack(
        [
            rr.ravel() * (1.0 - ratio),
            cc.ravel() * (1.0 - ratio),
            image.astype(np.float64).ravel() * INTENSITY_SCALE * ratio,
        ],
        axis=1,
    )


def parzen_density(feats: np.ndarray, kernel_size: float) -> np.ndarray:
    """Unnormalized Gaussian kernel sums over all pixel pairs."""
    n = len(feats)
    inv = 1.0 / (2.0 * kernel_size ** 2)
    sq = (feats ** 2).sum(axis=1)
    density = np.empty(n, dtype=np.float64)
    chunk = 1024
    for i in range(0, n, chunk):
        d2 = sq[i:i + chunk, None] + sq[None, :] - 2.0 * (feats[i:i + chunk] @ feats.T)
        np.maximum(d2, 0.0, out=d2)
        density[i:i + chunk] = np.exp(-d2 * inv).sum(axis=1)
    return density


def link_pixels(image: np.ndarray, density: np.ndarray, params: QuickShiftParams) -> np.ndarray:
    """Flat link-target index per pixel, -1 for roots.

    The target is the nearest strictly-higher-density pixel within
    max_dist; equidistant candidates resolve to the lower scanline index.
    Distances are computed per pair from the embedded features, exactly as
    a naive per-pixel loop would; the spatial search window only prunes
    offsets that cannot reach max_dist (feature distance bounds spatial
    distance by the (1-ratio) factor), so the pruning is exact.
    """
    h, w = image.shape
    n = h * w
    sr = 1.0 - params.ratio
    grid = pixel_features(image, params.ratio).reshape(h, w, 3)
    dgrid = density.reshape(h, w)
    md2 = params.max_dist ** 2

    if sr > 0:
        rad = int(np.floor(params.max_dist / sr)) + 1
    else:
        rad = max(h, w)  # ratio == 1: spatial term vanishes, search everywhere

    best_d2 = np.full((h, w), np.inf)
    best_target = np.full((h, w), -1, dtype=np.int64)
    flat_idx = np.arange(n, dtype=np.int64).reshape(h, w)

    # Offsets in scanline order of the candidate, so a strict < update
    # keeps the lowest-scanline candidate among exact distance ties.
    for dr in range(-rad, rad + 1):
        for dc in range(-rad, rad + 1):
            if dr == 0 and dc == 0:
                continue
            if (sr * dr) ** 2 + (sr * dc) ** 2 > md2 * (1.0 + 1e-12) + 1e-12:
                continue
            r0, r1 = max(0, -dr), min(h, h - dr)
            c0, c1 = max(0, -dc), min(w, w - dc)
            if r0 >= r1 or c0 >= c1:
                continue
            src = grid[r0:r1, c0:c1, :]
            dst = grid[r0 + dr:r1 + dr, c0 + dc:c1 + dc, :]
            d0 = dst[..., 0] - src[..., 0]
            d1 = dst[..., 1] - src[..., 1]
            d2v = dst[..., 2] - src[..., 2]
            dist2 = (d0 * d0 + d1 * d1) + d2v * d2v
            ok = (
                (dgrid[r0 + dr:r1 + dr, c0 + dc:c1 + dc] > dgrid[r0:r1, c0:c1])
                & (dist2 <= md2)
                & (dist2 < best_d2[r0:r1, c0:c1])
            )
            best_d2[r0:r1, c0:c1][ok] = dist2[ok]
            best_target[r0:r1, c0:c1][ok] = flat_idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc][ok]

    return best_target.ravel()


def label_from_links(parents: np.ndarray, shape: tuple[int, int]) -> SuperpixelMap:
    """Resolve link trees to segment ids, relabeled in scanline order of roots."""
    n = len(parents)
    roots = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if roots[i] >= 0:
            continue
        path = []
        j = i
        while roots[j] < 0 and parents[j] >= 0:
            path.append(j)
            j = parents[j]
        root = roots[j] if roots[j] >= 0 else j
        roots[i] = root
        for p in path:
            roots[p] = root

    root_ids = np.unique(roots)  # unique() sorts -> scanline order of roots
    remap = np.full(n, -1, dtype=np.int64)
    remap[root_ids] = np.arange(len(root_ids))
    labels = remap[roots]
    return SuperpixelMap(assignment=labels.reshape(shape), n_segments=len(root_ids))


def quick_shift(image: np.ndarray, params: QuickShiftParams | None = None) -> SuperpixelMap:
    """Partition an image into superpixels. Deterministic in image + params."""
    params = params or QuickShiftParams()
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ValueError("image must be a non-empty HxW array")
    feats = pixel_features(image, params.ratio)
    density = parzen_density(feats, params.kernel_size)
    parents = link_pixels(image, density, params)
    return label_from_links(parents, image.shape)


def mask_from_segments(segmap: SuperpixelMap, selected_ids) -> np.ndarray:
    """Binary mask covering exactly the selected segment ids."""
    ids = np.asarray(sorted(int(i) for i in selected_ids), dtype=np.int64)
    if len(ids) and (ids.min() < 0 or ids.max() >= segmap.n_segments):
        raise ValueError(
            f"segment id out of range: valid ids are 0..{segmap.n_segments - 1}"
        )
    return np.isin(segmap.assignment, ids)


def segments_touching_mask(segmap: SuperpixelMap, mask: np.ndarray, min_overlap: float) -> set[int]:
    """Ids of segments overlapped by the mask with fraction >= min_overlap.

    Segments without any overlap are never returned, so an empty mask
    yields the empty set for every min_overlap.
    """
    mask = np.asarray(mask)
    if mask.shape != segmap.assignment.shape:
        raise ValueError(
            f"mask shape {mask.shape} does not match segment map {segmap.assignment.shape}"
        )
    mask = mask.astype(bool)
    sizes = np.bincount(segmap.assignment.ravel(), minlength=segmap.n_segments)
    hits = np.bincount(segmap.assignment[mask].ravel(), minlength=segmap.n_segments)
    frac = hits / np.maximum(sizes, 1)
    sel = (hits > 0) & (frac >= min_overlap)
    return {int(i) for i in np.nonzero(sel)[0]}
