"""Operator entry point: dataset preparation, experiments, baselines, serving."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .config import (
    ConfigError,
    dump_effective_config,
    experiment_from_dict,
    load_config_file,
)


@click.group()
@click.version_option(version=__version__, prog_name="ximl")
def main() -> None:
    """Explainable interactive image-classification workbench."""


@main.group()
def dataset() -> None:
    """Fetch and prepare datasets."""


@dataset.command("fetch")
@click.option("--dataset", "name", type=click.Choice(["fashion", "medical"]),
              required=True, help="which public archive set to download")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def dataset_fetch(name: str, out_dir: Path) -> None:
    """Download the public archives (requires network access)."""
    from .dataset import DatasetError, fetch_dataset

    try:
        written = fetch_dataset(name, out_dir)
    except DatasetError as exc:
        raise click.ClickException(str(exc)) from exc
    except Exception as exc:  # download/network failure
        raise click.ClickException(f"download failed: {exc}") from exc
    for path in written:
        click.echo(f"wrote {path}")


@dataset.command("prepare")
@click.option("--path", type=click.Path(path_type=Path),
              help="source directory (IDX files or class folders)")
@click.option("--format", "fmt", type=click.Choice(["idx", "image_folder", "synthetic"]),
              required=True)
@click.option("--classes", nargs=2, type=str, default=None,
              help="the two class names to keep")
@click.option("--n-per-class", type=int, default=400, show_default=True,
              help="instances per class (synthetic only)")
@click.option("--seed", type=int, default=0, show_default=True,
              help="generator seed (synthetic only)")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True,
              help="cache file to write")
def dataset_prepare(path: Path | None, fmt: str, classes, n_per_class: int,
                    seed: int, out_path: Path) -> None:
    """Normalize a dataset into the versioned binary cache."""
    from .dataset import DatasetError, load_dataset, make_synthetic_dataset, save_cache

    try:
        if fmt == "synthetic":
            ds = make_synthetic_dataset(n_per_class, seed=seed)
        else:
            if path is None or classes is None:
                raise click.UsageError("--path and --classes are required for this format")
            ds = load_dataset(path, fmt, (classes[0], classes[1]))
    except DatasetError as exc:
        raise click.ClickException(str(exc)) from exc
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_cache(ds, out_path)
    click.echo(f"wrote {out_path} ({len(ds)} instances, classes {ds.class_names})")


@main.group()
def experiment() -> None:
    """Headless simulated-oracle experiments."""


@experiment.command("run")
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=None, help="override the session seed")
def experiment_run(config_path: Path, out_dir: Path, seed: int | None) -> None:
    """Run the full mode x counterexample grid and write reports."""
    from .evaluation import run_experiment
    from .reporting import format_results_table, write_experiment_outputs

    try:
        cfg = experiment_from_dict(load_config_file(config_path), seed_override=seed)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_effective_config(cfg, out_dir / "effective_config.yaml")
    try:
        result = run_experiment(cfg)
    except Exception as exc:
        raise click.ClickException(f"experiment failed: {exc}") from exc
    paths = write_experiment_outputs(result, out_dir)
    click.echo(format_results_table(result))
    click.echo(f"results written to {paths['results']}")


@main.group()
def baseline() -> None:
    """Conventional (non-interactive) training runs."""


@baseline.command("run")
@click.option("--config", "config_path", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--n-train", type=int, required=True)
@click.option("--n-test", type=int, required=True)
@click.option("--seed", type=int, default=None, help="override the split seed")
@click.option("--counterexamples", type=int, default=1, show_default=True,
              help="c assumed for the labeling-effort comparison")
@click.option("--save-model", "model_path", type=click.Path(path_type=Path),
              default=None, help="write a model checkpoint here")
def baseline_run(config_path: Path, out_dir: Path, n_train: int, n_test: int,
                 seed: int | None, counterexamples: int,
                 model_path: Path | None) -> None:
    """Train on n_train instances, evaluate on n_test, report labeling effort."""
    from . import classifier
    from .dataset import split_pools
    from .evaluation import load_experiment_dataset, train_baseline
    from .reporting import format_baseline_report, write_baseline_outputs

    try:
        cfg = experiment_from_dict(load_config_file(config_path))
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_effective_config(cfg, out_dir / "effective_config.yaml")
    try:
        ds = load_experiment_dataset(cfg)
        result = train_baseline(
            ds, n_train, n_test, cfg.model,
            seed=seed if seed is not None else cfg.split_seed,
            caipi_l0=cfg.l0_size, caipi_budget=cfg.budget,
            caipi_counterexamples=counterexamples,
        )
    except Exception as exc:
        raise click.ClickException(f"baseline failed: {exc}") from exc
    paths = write_baseline_outputs(result, cfg.dataset_kind, out_dir)
    if model_path is not None:
        pools = split_pools(ds, seed=seed if seed is not None else cfg.split_seed,
                            l0_size=n_train, test_size=n_test, expl_test_size=0)
        model = classifier.fit(pools.labeled, cfg.model)
        classifier.save_model(model, model_path)
        click.echo(f"checkpoint written to {model_path}")
    click.echo(format_baseline_report(result, cfg.dataset_kind))
    click.echo(f"reports written to {paths['report'].parent}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="experiment-style config for the data source and defaults")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--budget", type=int, default=None, help="session iteration budget")
@click.option("--counterexamples", type=int, default=1, show_default=True)
@click.option("--mode", type=click.Choice(["RWR_ONLY", "RWR_PLUS_W"]),
              default="RWR_PLUS_W", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(path_type=Path), default=None,
              help="directory with the built browser UI (mounted at /ui)")
def serve_cmd(config_path: Path | None, port: int, host: str, budget: int | None,
              counterexamples: int, mode: str, ui_dir: Path | None) -> None:
    """Serve the interactive annotation session over HTTP."""
    from .config import session_from_experiment
    from .evaluation import ExperimentConfig
    from .service import ServerConfig, serve

    if config_path is not None:
        try:
            exp = experiment_from_dict(load_config_file(config_path))
        except ConfigError as exc:
            raise click.ClickException(str(exc)) from exc
    else:
        exp = ExperimentConfig(dataset_kind="synthetic", n_per_class=60, l0_size=16,
                               test_size=40, expl_test_size=8, budget=10)
    if ui_dir is not None and not ui_dir.is_dir():
        raise click.ClickException(f"--ui directory not found: {ui_dir}")
    session = session_from_experiment(
        exp, budget=budget, counterexamples=counterexamples, mode=mode
    )
    click.echo(f"serving on http://{host}:{port} (dataset: {exp.dataset_kind})")
    if ui_dir is not None:
        click.echo(f"annotation UI at http://{host}:{port}/ui/")
    serve(ServerConfig(experiment=exp, session=session, ui_dir=ui_dir),
          host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
