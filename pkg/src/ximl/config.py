"""Config-file parsing: YAML (or JSON) into the typed config objects.

The documented schema lives in the README; unknown keys are rejected so
typos fail loudly. `effective_config` dumps the fully resolved settings
back out for run provenance.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path
from typing import Any

import yaml

from .augment import AugmentParams
from .classifier import ModelConfig
from .engine import Mode, SessionConfig
from .evaluation import EvalOptions, ExperimentConfig
from .explainer import ExplainerConfig
from .segmentation import QuickShiftParams


class ConfigError(ValueError):
    pass


def _check_keys(section: str, data: dict[str, Any], allowed: set[str]) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


def _tuple2(value, name: str) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{name} must be a pair")
    return tuple(value)


def load_config_file(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping: {path}")
    return data


def explainer_from_dict(data: dict[str, Any]) -> ExplainerConfig:
    _check_keys("explainer", data,
                {"n_samples", "max_features", "kernel_width", "fill", "seed"})
    return ExplainerConfig(**data)


def segmentation_from_dict(data: dict[str, Any]) -> QuickShiftParams:
    _check_keys("segmentation", data, {"kernel_size", "max_dist", "ratio", "seed"})
    return QuickShiftParams(**data)


def model_from_dict(data: dict[str, Any]) -> ModelConfig:
    allowed = {
        "epochs", "batch_size", "learning_rate", "adam_betas", "adam_eps",
        "dropout", "seed", "input_size", "conv_filters", "conv_kernel",
        "conv_stride", "pool_kernel", "pool_stride", "hidden_units",
        "penultimate_units", "activation", "pool_kind", "init_scheme",
    }
    _check_keys("model", data, allowed)
    if "adam_betas" in data:
        data = {**data, "adam_betas": _tuple2(data["adam_betas"], "model.adam_betas")}
    return ModelConfig(**data)


def augment_from_dict(data: dict[str, Any]) -> AugmentParams:
    allowed = {"scale_range", "rotation_range", "translation_range", "fill",
               "max_attempts", "margin"}
    _check_keys("augment", data, allowed)
    kwargs = dict(data)
    if "scale_range" in kwargs:
        kwargs["scale_range"] = _tuple2(kwargs["scale_range"], "augment.scale_range")
    if "rotation_range" in kwargs:
        kwargs["rotation_range"] = _tuple2(kwargs["rotation_range"], "augment.rotation_range")
    if kwargs.get("translation_range") is not None:
        pair = _tuple2(kwargs["translation_range"], "augment.translation_range")
        kwargs["translation_range"] = (
            _tuple2(pair[0], "augment.translation_range[0]"),
            _tuple2(pair[1], "augment.translation_range[1]"),
        )
    return AugmentParams(**kwargs)


def experiment_from_dict(data: dict[str, Any], seed_override: int | None = None) -> ExperimentConfig:
    top_allowed = {
        "name", "dataset", "split", "grid", "session", "oracle", "explainer",
        "segmentation", "model", "augment", "evaluation",
    }
    _check_keys("experiment config", data, top_allowed)

    dataset = dict(data.get("dataset", {}))
    _check_keys("dataset", dataset, {"kind", "path", "classes", "n_per_class"})
    split = dict(data.get("split", {}))
    _check_keys("split", split,
                {"seed", "l0_size", "test_size", "expl_test_size", "mask_threshold"})
    grid = dict(data.get("grid", {}))
    _check_keys("grid", grid, {"modes", "counterexamples"})
    session = dict(data.get("session", {}))
    _check_keys("session", session, {"budget", "seed"})
    oracle = dict(data.get("oracle", {}))
    _check_keys("oracle", oracle, {"iou_threshold"})
    evaluation = dict(data.get("evaluation", {}))
    _check_keys("evaluation", evaluation,
                {"accuracy_every", "explanation_every", "explanation_subset"})

    modes = tuple(grid.get("modes", ("RWR_ONLY", "RWR_PLUS_W")))
    for mode in modes:
        Mode(mode)  # raises on unknown mode names

    kwargs: dict[str, Any] = {
        "name": data.get("name", "experiment"),
        "dataset_kind": dataset.get("kind", "synthetic"),
        "dataset_path": dataset.get("path"),
        "n_per_class": dataset.get("n_per_class", 400),
        "split_seed": split.get("seed", 7),
        "l0_size": split.get("l0_size", 100),
        "test_size": split.get("test_size", 200),
        "expl_test_size": split.get("expl_test_size", 40),
        "mask_threshold": split.get("mask_threshold", 0.1),
        "modes": modes,
        "counterexample_counts": tuple(grid.get("counterexamples", (0, 1, 3, 5))),
        "budget": session.get("budget", 100),
        "seed": session.get("seed", 7),
        "iou_threshold": oracle.get("iou_threshold", 0.3),
        "explainer": explainer_from_dict(dict(data.get("explainer", {}))),
        "segmentation": segmentation_from_dict(dict(data.get("segmentation", {}))),
        "model": model_from_dict(dict(data.get("model", {}))),
        "augment": augment_from_dict(dict(data.get("augment", {}))),
        "evaluation": EvalOptions(**evaluation),
    }
    if "classes" in dataset:
        kwargs["classes"] = _tuple2(dataset["classes"], "dataset.classes")
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return ExperimentConfig(**kwargs)


def session_from_experiment(exp: ExperimentConfig, budget: int | None = None,
                            counterexamples: int = 1,
                            mode: str = "RWR_PLUS_W") -> SessionConfig:
    return SessionConfig(
        budget=budget if budget is not None else exp.budget,
        counterexamples=counterexamples,
        mode=Mode(mode),
        explainer=exp.explainer,
        segmentation=exp.segmentation,
        model=exp.model,
        augment=exp.augment,
        seed=exp.seed,
    )


def effective_config(exp: ExperimentConfig) -> dict[str, Any]:
    """Fully resolved settings, suitable for reproducing the run."""
    return {
        "name": exp.name,
        "dataset": {
            "kind": exp.dataset_kind,
            "path": exp.dataset_path,
            "classes": list(exp.classes),
            "n_per_class": exp.n_per_class,
        },
        "split": {
            "seed": exp.split_seed,
            "l0_size": exp.l0_size,
            "test_size": exp.test_size,
            "expl_test_size": exp.expl_test_size,
            "mask_threshold": exp.mask_threshold,
        },
        "grid": {
            "modes": list(exp.modes),
            "counterexamples": list(exp.counterexample_counts),
        },
        "session": {"budget": exp.budget, "seed": exp.seed},
        "oracle": {"iou_threshold": exp.iou_threshold},
        "explainer": asdict(exp.explainer),
        "segmentation": asdict(exp.segmentation),
        "model": {**asdict(exp.model), "adam_betas": list(exp.model.adam_betas)},
        "augment": {
            **asdict(exp.augment),
            "scale_range": list(exp.augment.scale_range),
            "rotation_range": list(exp.augment.rotation_range),
            "translation_range": (
                None if exp.augment.translation_range is None
                else [list(p) for p in exp.augment.translation_range]
            ),
        },
        "evaluation": asdict(exp.evaluation),
    }


def dump_effective_config(exp: ExperimentConfig, path: Path) -> None:
    Path(path).write_text(
        yaml.safe_dump(effective_config(exp), sort_keys=True), encoding="utf-8"
    )
