"""Dataset ingestion and pool management.

Supports two on-disk layouts: IDX files (the Fashion MNIST distribution
format, gzip accepted) and directory-per-class folders of 8-bit grayscale
images (the Medical MNIST layout). All images are normalized to the
canonical 64x64 float grid in [0, 1]; a synthetic two-class generator is
included for tests and demos.
"""

from __future__ import annotations

import gzip
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

CANONICAL_SIZE = 64

# Fashion MNIST label indices, per the published class list.
FASHION_CLASSES = {
    "T-shirt/top": 0,
    "Trouser": 1,
    "Pullover": 2,
    "Dress": 3,
    "Coat": 4,
    "Sandal": 5,
    "Sneaker": 7,
    "Shirt": 6,
    "Bag": 8,
    "Ankle boot": 9,
}

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CACHE_MAGIC = b"XIMLDC01"

FETCH_URLS = {
    "fashion": [
        "https://github.com/zalandoresearch/fashion-mnist/raw/master/data/fashion/train-images-idx3-ubyte.gz",
        "https://github.com/zalandoresearch/fashion-mnist/raw/master/data/fashion/train-labels-idx1-ubyte.gz",
        "https://github.com/zalandoresearch/fashion-mnist/raw/master/data/fashion/t10k-images-idx3-ubyte.gz",
        "https://github.com/zalandoresearch/fashion-mnist/raw/master/data/fashion/t10k-labels-idx1-ubyte.gz",
    ],
    "medical": [
        "https://github.com/apolanco3225/Medical-MNIST-Classification/archive/refs/heads/master.tar.gz",
    ],
}


class DatasetError(Exception):
    """Raised for invalid dataset paths, classes, or sizes."""


class DecodeError(DatasetError):
    """Raised when a dataset file cannot be decoded; names the file."""


@dataclass(eq=False)
class Image:
    """A grayscale instance: HxW float pixels in [0, 1] plus a stable id."""

    pixels: np.ndarray
    id: str
    source_class: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass(eq=False)
class GroundTruthMask:
    """Binary explanation mask aligned with one Image."""

    mask: np.ndarray
    instance_id: str


@dataclass
class Dataset:
    """All instances of the two requested classes, labels in {0, 1}."""

    images: list[Image]
    labels: np.ndarray
    class_names: tuple[str, str]

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class Pools:
    """Disjoint labeled/unlabeled/test/explanation-test pools.

    Immutable after construction; the session engine copies labeled and
    unlabeled into its own mutable state.
    """

    labeled: list[tuple[Image, int]]
    unlabeled: list[Image]
    test: list[tuple[Image, int]]
    expl_test: list[tuple[Image, int, GroundTruthMask]]
    class_names: tuple[str, str] = ("0", "1")


def _to_canonical(raw: np.ndarray) -> np.ndarray:
    """8-bit HxW array -> canonical 64x64 float32 grid in [0, 1].

    Smaller inputs (e.g. 28x28) are upscaled with bilinear interpolation.
    """
    if raw.shape != (CANONICAL_SIZE, CANONICAL_SIZE):
        pil = PILImage.fromarray(raw, mode="L")
        pil = pil.resize((CANONICAL_SIZE, CANONICAL_SIZE), PILImage.BILINEAR)
        raw = np.asarray(pil, dtype=np.uint8)
    return raw.astype(np.float32) / 255.0


def _open_maybe_gzip(path: Path) -> bytes:
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(data)
        except OSError as exc:
            raise DecodeError(f"cannot decompress {path}: {exc}") from exc
    return data


def read_idx(path: Path) -> np.ndarray:
    """Parse one big-endian IDX file (unsigned byte payload)."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing path: {path}")
    data = _open_maybe_gzip(path)
    if len(data) < 4:
        raise DecodeError(f"truncated IDX file: {path}")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IDX_IMAGES_MAGIC:
        ndim = 3
    elif magic == IDX_LABELS_MAGIC:
        ndim = 1
    else:
        raise DecodeError(f"bad IDX magic 0x{magic:08x} in {path}")
    header = 4 + 4 * ndim
    if len(data) < header:
        raise DecodeError(f"truncated IDX header: {path}")
    dims = struct.unpack(">" + "I" * ndim, data[4:header])
    count = int(np.prod(dims))
    payload = data[header:]
    if len(payload) < count:
        raise DecodeError(f"truncated IDX payload in {path}: expected {count} bytes, got {len(payload)}")
    return np.frombuffer(payload[:count], dtype=np.uint8).reshape(dims)


def _find_idx_pairs(path: Path) -> list[tuple[Path, Path, str]]:
    """Locate (images, labels, tag) IDX file pairs under a directory."""
    pairs = []
    for tag in ("train", "t10k"):
        img = None
        lab = None
        for suffix in ("", ".gz"):
            cand = path / f"{tag}-images-idx3-ubyte{suffix}"
            if cand.exists():
                img = cand
            cand = path / f"{tag}-labels-idx1-ubyte{suffix}"
            if cand.exists():
                lab = cand
        if img is not None and lab is not None:
            pairs.append((img, lab, tag))
    return pairs


def load_idx_dataset(path: Path, classes: tuple[str, str]) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing path: {path}")
    for name in classes:
        if name not in FASHION_CLASSES:
            raise DatasetError(f"unknown class name: {name!r}")
    pairs = _find_idx_pairs(path)
    if not pairs:
        raise DatasetError(f"no IDX image/label pairs found under {path}")

    ordered = sorted(classes)
    wanted = {FASHION_CLASSES[name]: ordered.index(name) for name in classes}
    images: list[Image] = []
    labels: list[int] = []
    for img_path, lab_path, tag in pairs:
        raw_images = read_idx(img_path)
        raw_labels = read_idx(lab_path)
        if raw_images.ndim != 3 or raw_labels.ndim != 1:
            raise DecodeError(f"unexpected IDX ranks in {img_path} / {lab_path}")
        if len(raw_images) != len(raw_labels):
            raise DecodeError(f"image/label count mismatch in {img_path} / {lab_path}")
        for i, (arr, lab) in enumerate(zip(raw_images, raw_labels)):
            if int(lab) not in wanted:
                continue
            cls_idx = wanted[int(lab)]
            images.append(
                Image(
                    pixels=_to_canonical(arr),
                    id=f"{tag}-{i:05d}",
                    source_class=ordered[cls_idx],
                )
            )
            labels.append(cls_idx)
    if not images:
        raise DatasetError("no instances found")
    return Dataset(images=images, labels=np.asarray(labels, dtype=np.int64), class_names=(ordered[0], ordered[1]))


def load_image_folder(path: Path, classes: tuple[str, str]) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing path: {path}")
    for name in classes:
        if not (path / name).is_dir():
            raise DatasetError(f"unknown class name: {name!r} (no such subdirectory under {path})")
    ordered = sorted(classes)
    images: list[Image] = []
    labels: list[int] = []
    for cls_idx, name in enumerate(ordered):
        files = sorted(p for p in (path / name).iterdir() if p.is_file())
        for f in files:
            try:
                with PILImage.open(f) as pil:
                    raw = np.asarray(pil.convert("L"), dtype=np.uint8)
            except Exception as exc:
                raise DecodeError(f"cannot decode image file {f}: {exc}") from exc
            images.append(
                Image(pixels=_to_canonical(raw), id=f"{name}/{f.name}", source_class=name)
            )
            labels.append(cls_idx)
    if not images:
        raise DatasetError("no instances found")
    return Dataset(images=images, labels=np.asarray(labels, dtype=np.int64), class_names=(ordered[0], ordered[1]))


def load_dataset(path: Path, format: str, classes: tuple[str, str]) -> Dataset:
    """Load all instances of the two classes; labels map alphabetically to {0, 1}."""
    if len(classes) != 2 or classes[0] == classes[1]:
        raise DatasetError("exactly two distinct classes are required")
    if format == "idx":
        return load_idx_dataset(Path(path), classes)
    if format == "image_folder":
        return load_image_folder(Path(path), classes)
    raise DatasetError(f"unknown dataset format: {format!r}")


def derive_ground_truth_mask(image: Image, threshold: float = 0.1) -> GroundTruthMask:
    """Proxy ground-truth explanation: the intensity-threshold foreground."""
    return GroundTruthMask(mask=image.pixels > threshold, instance_id=image.id)


def split_pools(
    dataset: Dataset,
    seed: int,
    l0_size: int,
    test_size: int,
    expl_test_size: int,
    balance: bool = True,
    mask_threshold: float = 0.1,
) -> Pools:
    """Deterministic, class-balanced split into labeled/unlabeled/test/expl-test."""
    total = l0_size + test_size + expl_test_size
    if total > len(dataset):
        raise DatasetError(
            f"insufficient instances: need {total}, dataset has {len(dataset)}"
        )
    if balance:
        for name, size in (("l0_size", l0_size), ("test_size", test_size), ("expl_test_size", expl_test_size)):
            if size % 2 != 0:
                raise DatasetError(f"{name}={size} must be even for balanced splits")

    rng = np.random.default_rng(seed)
    by_class: list[list[int]] = [[], []]
    for i, lab in enumerate(dataset.labels):
        by_class[int(lab)].append(i)
    for cls in (0, 1):
        idx = np.asarray(by_class[cls])
        rng.shuffle(idx)
        by_class[cls] = list(idx)

    def take(n: int) -> list[int]:
        picked = []
        for cls in (0, 1):
            if len(by_class[cls]) < n // 2:
                raise DatasetError(
                    f"insufficient instances of class {dataset.class_names[cls]!r}"
                )
            picked.extend(by_class[cls][: n // 2])
            by_class[cls] = by_class[cls][n // 2:]
        return picked

    test_idx = take(test_size)
    expl_idx = take(expl_test_size)
    labeled_idx = take(l0_size)
    rest = sorted(by_class[0] + by_class[1])

    imgs, labs = dataset.images, dataset.labels
    return Pools(
        labeled=[(imgs[i], int(labs[i])) for i in labeled_idx],
        unlabeled=[imgs[i] for i in rest],
        test=[(imgs[i], int(labs[i])) for i in test_idx],
        expl_test=[
            (imgs[i], int(labs[i]), derive_ground_truth_mask(imgs[i], mask_threshold))
            for i in expl_idx
        ],
        class_names=dataset.class_names,
    )


def save_cache(dataset: Dataset, path: Path) -> None:
    """Write a normalized binary cache: magic, JSON header, raw uint8 pixels."""
    path = Path(path)
    arr = np.stack([np.round(img.pixels * 255.0).astype(np.uint8) for img in dataset.images])
    header = {
        "version": 1,
        "class_names": list(dataset.class_names),
        "count": len(dataset),
        "height": int(arr.shape[1]),
        "width": int(arr.shape[2]),
        "ids": [img.id for img in dataset.images],
        "labels": [int(x) for x in dataset.labels],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack(">I", len(blob)))
        fh.write(blob)
        fh.write(arr.tobytes())


def load_cache(path: Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing path: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(len(CACHE_MAGIC))
        if magic != CACHE_MAGIC:
            raise DecodeError(f"bad cache magic in {path}")
        (hlen,) = struct.unpack(">I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise DecodeError(f"unsupported cache version {header.get('version')} in {path}")
        n, h, w = header["count"], header["height"], header["width"]
        payload = fh.read(n * h * w)
        if len(payload) != n * h * w:
            raise DecodeError(f"truncated cache payload in {path}")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w)
    names = tuple(header["class_names"])
    images = [
        Image(pixels=_to_canonical(arr[i]), id=header["ids"][i],
              source_class=names[header["labels"][i]])
        for i in range(n)
    ]
    return Dataset(
        images=images,
        labels=np.asarray(header["labels"], dtype=np.int64),
        class_names=names,  # type: ignore[arg-type]
    )


def fetch_dataset(name: str, out_dir: Path) -> list[Path]:
    """Download the public archives for `name` into out_dir.

    Requires network access; returns the list of files written.
    """
    import requests

    if name not in FETCH_URLS:
        raise DatasetError(f"unknown dataset {name!r}; choose from {sorted(FETCH_URLS)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for url in FETCH_URLS[name]:
        target = out_dir / url.rsplit("/", 1)[1]
        resp = requests.get(url, timeout=120)
        resp.raise_for_status()
        target.write_bytes(resp.content)
        written.append(target)
    return written


def _stamp(canvas: np.ndarray, rr: np.ndarray, cc: np.ndarray, value: float) -> None:
    ok = (rr >= 0) & (rr < canvas.shape[0]) & (cc >= 0) & (cc < canvas.shape[1])
    canvas[rr[ok], cc[ok]] = value


def make_synthetic_dataset(n_per_class: int, seed: int = 0, size: int = CANONICAL_SIZE) -> Dataset:
    """Two-class toy dataset (rings vs crosses) with position/size jitter.

    Used for tests, demos and the default service config; backgrounds are
    black so the intensity-threshold proxy masks cover the shape itself.
    """
    rng = np.random.default_rng(seed)
    images: list[Image] = []
    labels: list[int] = []
    yy, xx = np.mgrid[0:size, 0:size]
    for cls, name in ((0, "cross"), (1, "ring")):
        for i in range(n_per_class):
            img = np.zeros((size, size), dtype=np.float32)
            cy = size // 2 + int(rng.integers(-size // 8, size // 8 + 1))
            cx = size // 2 + int(rng.integers(-size // 8, size // 8 + 1))
            brightness = float(rng.uniform(0.7, 1.0))
            if name == "ring":
                radius = float(rng.uniform(size * 0.15, size * 0.28))
                width = float(rng.uniform(2.0, 4.0))
                dist = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
                img[np.abs(dist - radius) <= width] = brightness
            else:
                half = int(rng.uniform(size * 0.15, size * 0.28))
                thick = int(rng.uniform(2, 5))
                img[cy - thick: cy + thick + 1, max(0, cx - half): cx + half + 1] = brightness
                img[max(0, cy - half): cy + half + 1, cx - thick: cx + thick + 1] = brightness
            noise = rng.normal(0.0, 0.02, size=img.shape).astype(np.float32)
            img = np.clip(img + np.where(img > 0, noise, 0.0), 0.0, 1.0)
            images.append(Image(pixels=img, id=f"{name}-{i:05d}", source_class=name))
            labels.append(cls)
    return Dataset(images=images, labels=np.asarray(labels, dtype=np.int64),
                   class_names=("cross", "ring"))
