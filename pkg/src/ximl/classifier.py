"""Reference binary image classifier (the black-box f).

A small CNN: one 9x9 conv with 2 filters, 8x8/8 max pooling, then
98 -> 98 -> 16 -> 2 linear layers with dropout after the first hidden
layer. Trained with Adam on softmax cross entropy. Training always starts
from a fresh seeded initialization; no warm starts.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field, asdict

import numpy as np
import torch
from torch import nn

from .dataset import CANONICAL_SIZE, Image

CHECKPOINT_MAGIC = b"XIMLMD01"


@dataclass(frozen=True)
class ModelConfig:
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    dropout: float = 0.5
    seed: int = 0
    input_size: int = CANONICAL_SIZE
    conv_filters: int = 2
    conv_kernel: int = 9
    conv_stride: int = 1
    pool_kernel: int = 8
    pool_stride: int = 8
    hidden_units: int = 98
    penultimate_units: int = 16
    activation: str = "relu"        # applied after conv and hidden linears
    pool_kind: str = "max"
    init_scheme: str = "torch-default"


def feature_dimension(config: ModelConfig) -> int:
    """Flattened feature count after conv + pool (98 for 64x64 input)."""
    side = (config.input_size - config.conv_kernel) // config.conv_stride + 1
    side = (side - config.pool_kernel) // config.pool_stride + 1
    return side * side * config.conv_filters


def build_network(config: ModelConfig) -> nn.Module:
    if config.activation != "relu":
        raise ValueError(f"unsupported activation {config.activation!r}")
    pool: nn.Module
    if config.pool_kind == "max":
        pool = nn.MaxPool2d(config.pool_kernel, config.pool_stride)
    elif config.pool_kind == "avg":
        pool = nn.AvgPool2d(config.pool_kernel, config.pool_stride)
    else:
        raise ValueError(f"unsupported pool_kind {config.pool_kind!r}")
    flat = feature_dimension(config)
    return nn.Sequential(
        nn.Conv2d(1, config.conv_filters, config.conv_kernel, config.conv_stride),
        nn.ReLU(),
        pool,
        nn.Flatten(),
        nn.Linear(flat, config.hidden_units),
        nn.ReLU(),
        nn.Dropout(config.dropout),
        nn.Linear(config.hidden_units, config.penultimate_units),
        nn.ReLU(),
        nn.Linear(config.penultimate_units, 2),
    )


@dataclass(eq=False)
class Model:
    """Trained weights plus the config and per-epoch training losses."""

    net: nn.Module
    config: ModelConfig
    train_log: list[float] = field(default_factory=list)

    # the explainer's classifier-handle protocol
    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        return predict_proba(self, batch)


def _as_batch(images) -> np.ndarray:
    """list of Image / arrays / single array -> (n, H, W) float32 batch."""
    if isinstance(images, np.ndarray):
        if images.ndim == 2:
            images = images[None]
        return images.astype(np.float32)
    return np.stack(
        [img.pixels if isinstance(img, Image) else np.asarray(img) for img in images]
    ).astype(np.float32)


def fit(labeled: list[tuple[Image, int]], config: ModelConfig) -> Model:
    """Full retraining from a fresh seeded initialization on the labeled pool."""
    if len(labeled) < 2:
        raise ValueError("need at least two labeled instances")
    ys = np.asarray([lab for _, lab in labeled], dtype=np.int64)
    if not set(np.unique(ys)) <= {0, 1}:
        raise ValueError("labels must be in {0, 1}")
    if len(np.unique(ys)) < 2:
        raise ValueError("degenerate label distribution: both classes required")

    xs = _as_batch([img for img, _ in labeled])
    expected = (config.input_size, config.input_size)
    if xs.shape[1:] != expected:
        raise ValueError(f"images must be {expected}, got {xs.shape[1:]}")

    torch.manual_seed(config.seed)
    net = build_network(config)
    opt = torch.optim.Adam(
        net.parameters(), lr=config.learning_rate,
        betas=config.adam_betas, eps=config.adam_eps,
    )
    loss_fn = nn.CrossEntropyLoss()
    x_t = torch.from_numpy(xs).unsqueeze(1)
    y_t = torch.from_numpy(ys)

    net.train()
    train_log: list[float] = []
    n = len(labeled)
    for _ in range(config.epochs):
        perm = torch.randperm(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            opt.zero_grad()
            loss = loss_fn(net(x_t[idx]), y_t[idx])
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        train_log.append(total / n)
    net.eval()
    return Model(net=net, config=config, train_log=train_log)


def predict_proba(model: Model, images) -> np.ndarray:
    """Softmax-normalized (p0, p1) per image; dropout disabled."""
    batch = _as_batch(images)
    expected = (model.config.input_size, model.config.input_size)
    if batch.shape[1:] != expected:
        raise ValueError(f"images must be {expected}, got {batch.shape[1:]}")
    model.net.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, len(batch), 1024):
            chunk = torch.from_numpy(batch[start:start + 1024]).unsqueeze(1)
            outs.append(torch.softmax(model.net(chunk), dim=1).numpy())
    return np.concatenate(outs, axis=0)


def prediction_score(model: Model, image) -> float:
    """Confidence max(p0, p1) in [0.5, 1]; the query-selection criterion."""
    probs = predict_proba(model, [image])[0]
    return float(probs.max())


def save_model(model: Model, path) -> None:
    """Versioned binary checkpoint: magic, JSON config header, weight blob."""
    header = json.dumps({"version": 1, "config": asdict(model.config),
                         "train_log": model.train_log}).encode("utf-8")
    buf = io.BytesIO()
    torch.save(model.net.state_dict(), buf)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(">I", len(header)))
        fh.write(header)
        fh.write(buf.getvalue())


def load_model(path) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a model checkpoint: {path}")
        (hlen,) = struct.unpack(">I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        blob = fh.read()
    cfg_dict = dict(header["config"])
    cfg_dict["adam_betas"] = tuple(cfg_dict["adam_betas"])
    config = ModelConfig(**cfg_dict)
    net = build_network(config)
    net.load_state_dict(torch.load(io.BytesIO(blob), weights_only=True))
    net.eval()
    return Model(net=net, config=config, train_log=list(header.get("train_log", [])))
