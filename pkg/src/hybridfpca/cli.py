"""Command-line front end composing the pipeline through files.

Subcommands mirror the pipeline stages: ``simulate`` runs a replicate study,
``decompose`` fits and saves a decomposition, ``pool`` collapses a tensor or
a reconstruction to curves, ``fit`` estimates the curve-on-curves regression,
``select`` scans component counts by prediction error, and ``report`` renders
figures from previously written outputs.

Exit codes: 0 success, 2 invalid configuration or input, 3 numerical failure
(the message names the failing stage).  Logging level comes from the
``HYBRIDFPCA_LOG`` environment variable (error, warn, info, debug).
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import HybridFpcaError, IllPosedFitError, NumericalFailureError
from .fofreg import (
    FofConfig,
    coefficient_surface,
    fit_fof,
    predict,
    save_fof_model,
)
from .hpca import fit_hpca, load_hpca_model, reconstruct, save_hpca_model
from .metrics import read_report_csv, write_report_csv
from .pooling import pool_to_curve
from .selection import (
    read_selection_csv,
    save_selection_result,
    select_num_components,
    write_selection_csv,
)
from .simgen import run_scenario1, run_scenario2, settings_from_dict
from .tensorcore import (
    FLOAT_FMT,
    read_functional_csv,
    read_hybrid_csv,
    write_functional_csv,
)

log = logging.getLogger("hybridfpca")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class ConfigError(click.ClickException):
    exit_code = 2


class NumericalError(click.ClickException):
    exit_code = 3


def _fail_invalid(message: str) -> ConfigError:
    return ConfigError(message)


def _guard(stage: str):
    """Map package errors to exit codes, naming the pipeline stage on failure."""

    class _Guard:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is None:
                return False
            if isinstance(exc, (NumericalFailureError, IllPosedFitError, np.linalg.LinAlgError)):
                raise NumericalError(f"numerical failure in {stage}: {exc}")
            if isinstance(exc, HybridFpcaError):
                raise ConfigError(f"{stage}: {exc}")
            if isinstance(exc, OSError):
                raise ConfigError(f"{stage}: {exc}")
            return False

    return _Guard()


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _fail_invalid(f"cannot read config {path}: {exc}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _fail_invalid(
            f"invalid JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )


def _fof_config_from(path: str | None, seed: int | None = None) -> FofConfig:
    raw = _load_json(path) if path else {}
    if not isinstance(raw, dict):
        raise _fail_invalid("regression config must be a JSON object")
    if seed is not None:
        raw["seed"] = seed
    with _guard("regression config"):
        try:
            return FofConfig(**raw)
        except TypeError as exc:
            raise _fail_invalid(f"regression config: {exc}")


def _read_tensor(path: str):
    with _guard(f"reading tensor {path}"):
        return read_hybrid_csv(path)


def _read_predictors(paths) -> tuple[list, list[str]]:
    samples, subjects = [], None
    for path in paths:
        with _guard(f"reading predictor {path}"):
            sample, ids = read_functional_csv(path)
        if subjects is None:
            subjects = ids
        elif ids != subjects:
            raise _fail_invalid(f"subject ids in {path} differ from the first predictor file")
        samples.append(sample)
    return samples, subjects


def _check_alignment(tensor_subjects, predictor_subjects):
    if predictor_subjects is not None and tensor_subjects != predictor_subjects:
        raise _fail_invalid(
            "subject mismatch between tensor and predictors: "
            f"{tensor_subjects[:5]}... vs {predictor_subjects[:5]}..."
        )


@click.group()
@click.version_option(version=__version__, prog_name="hybridfpca")
def main():
    """Decomposition, pooling, and curve-on-curves regression tools."""
    level_name = os.environ.get("HYBRIDFPCA_LOG", "warn").lower()
    if level_name not in _LOG_LEVELS:
        raise _fail_invalid(
            f"HYBRIDFPCA_LOG={level_name!r} not recognized; use one of {sorted(_LOG_LEVELS)}"
        )
    logging.basicConfig(level=_LOG_LEVELS[level_name], format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--scenario", type=click.IntRange(1, 2), required=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON scenario settings; optional.")
@click.option("--seed", type=int, default=None, help="Override the settings seed.")
@click.option("--threads", type=int, default=None, help="Worker threads (default: cores).")
@click.option("--out", "out_dir", type=click.Path(), default="out")
def simulate(scenario, config_path, seed, threads, out_dir):
    """Run a replicate study and write report.csv, timing.csv, manifest.json."""
    raw = _load_json(config_path) if config_path else {}
    with _guard("scenario settings"):
        settings = settings_from_dict(raw)
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        overrides["threads"] = threads if threads is not None else (os.cpu_count() or 1)
        settings = dataclasses.replace(settings, **overrides)
    log.info("scenario %d: %d replicates, seed %s", scenario, settings.replicates, settings.seed)
    runner = run_scenario1 if scenario == 1 else run_scenario2
    with _guard(f"scenario {scenario} study"):
        metric_rows, timing_rows, manifest = runner(settings)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", metric_rows)
    write_report_csv(out / "timing.csv", timing_rows)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if manifest["failures"]:
        log.warning("%d replicate fits failed and were skipped", len(manifest["failures"]))
    click.echo(f"wrote {out / 'report.csv'}")


@main.command()
@click.argument("tensor_csv", type=click.Path(exists=True))
@click.option("--fve", type=float, default=0.9, show_default=True)
@click.option("--ranking", type=click.Choice(["variance", "lexicographic"]), default="variance")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def decompose(tensor_csv, fve, ranking, out_dir):
    """Fit the decomposition of a tensor CSV and save the model directory."""
    tensor, subjects = _read_tensor(tensor_csv)
    with _guard("decomposition"):
        model = fit_hpca(tensor, fve_target=fve, ranking=ranking)
    save_hpca_model(model, out_dir, subjects=subjects)
    log.info("retained K=%d, L=%d, M=%d components", model.K, model.L, model.M)
    click.echo(f"wrote model with {model.n_components} components to {out_dir}")


@main.command()
@click.argument("tensor_csv", type=click.Path(exists=True), required=False)
@click.option("--model", "model_dir", type=click.Path(), default=None,
              help="Pool a reconstruction from a saved model instead of raw data.")
@click.option("-q", "--components", "q", type=int, default=None,
              help="Components in the reconstruction (default: all retained).")
@click.option("--out", "out_path", type=click.Path(), required=True)
def pool(tensor_csv, model_dir, q, out_path):
    """Collapse a tensor (or a model reconstruction) to one curve per subject."""
    if (tensor_csv is None) == (model_dir is None):
        raise _fail_invalid("pass exactly one of TENSOR_CSV or --model")
    if tensor_csv is not None:
        tensor, subjects = _read_tensor(tensor_csv)
        if q is not None:
            raise _fail_invalid("-q applies only to --model reconstructions")
        with _guard("pooling"):
            pooled = pool_to_curve(tensor)
    else:
        with _guard(f"loading model {model_dir}"):
            model, subjects = load_hpca_model(model_dir)
        with _guard("reconstruction"):
            reconstructed = reconstruct(model, model.n_components if q is None else q)
        with _guard("pooling"):
            pooled = pool_to_curve(reconstructed)
    write_functional_csv(out_path, pooled, subjects=subjects)
    click.echo(f"wrote {pooled.n_subjects} pooled curves to {out_path}")


@main.command()
@click.argument("response_csv", type=click.Path(exists=True))
@click.argument("predictor_csvs", type=click.Path(exists=True), nargs=-1, required=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON regression settings.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def fit(response_csv, predictor_csvs, config_path, out_dir):
    """Fit the curve-on-curves regression and save the model, predictions, surfaces."""
    config = _fof_config_from(config_path)
    with _guard(f"reading response {response_csv}"):
        response, subjects = read_functional_csv(response_csv)
    predictors, pred_subjects = _read_predictors(predictor_csvs)
    _check_alignment(subjects, pred_subjects)
    with _guard("regression fit"):
        model = fit_fof(response, predictors, config)
        fitted = predict(model, predictors)
    out = Path(out_dir)
    save_fof_model(model, out / "model")
    write_functional_csv(out / "predictions.csv", fitted, subjects=subjects)
    _write_surfaces(out / "beta_surfaces.csv", model)
    click.echo(f"wrote regression model to {out / 'model'}")


def _write_surfaces(path, model):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["predictor", "g", "s", "value"])
        for j in range(1, model.n_predictors + 1):
            surface = coefficient_surface(model, j)
            for a, g in enumerate(model.g_grid.points):
                for b, s in enumerate(model.s_grid.points):
                    writer.writerow([j, FLOAT_FMT % g, FLOAT_FMT % s, FLOAT_FMT % surface[a, b]])


@main.command()
@click.argument("tensor_csv", type=click.Path(exists=True))
@click.argument("predictor_csvs", type=click.Path(exists=True), nargs=-1, required=True)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON regression settings.")
@click.option("--fve", type=float, default=0.9, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--resplits", type=int, default=1, show_default=True,
              help="Number of train/test resplits to scan.")
@click.option("--threads", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def select(tensor_csv, predictor_csvs, config_path, fve, seed, resplits, threads, out_dir):
    """Scan component counts by test MSPE across seeded resplits."""
    if resplits < 1:
        raise _fail_invalid("--resplits must be at least 1")
    base_config = _fof_config_from(config_path)
    tensor, subjects = _read_tensor(tensor_csv)
    predictors, pred_subjects = _read_predictors(predictor_csvs)
    _check_alignment(subjects, pred_subjects)
    threads = threads if threads is not None else (os.cpu_count() or 1)
    split_seeds = [
        int(ss.generate_state(1)[0]) for ss in np.random.SeedSequence(seed).spawn(resplits)
    ]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for i, split_seed in enumerate(split_seeds, start=1):
        config = dataclasses.replace(base_config, seed=split_seed)
        with _guard(f"selection resplit {i}"):
            result = select_num_components(
                tensor, predictors, config, fve_target=fve, threads=threads
            )
        save_selection_result(result, out, stem=f"resplit_{i:02d}")
        results.append(result)
        log.info("resplit %d/%d: q_min = %d", i, resplits, result.q_min)

    qs = sorted(results[0].mspe_by_q)
    train = np.median([[r.train_mspe_by_q[q] for q in qs] for r in results], axis=0)
    test = np.median([[r.mspe_by_q[q] for q in qs] for r in results], axis=0)
    seconds = np.median([[r.trace[q] for q in qs] for r in results], axis=0)
    write_selection_csv(out / "selection_aggregate.csv", qs, train, test, seconds)
    q_min = int(qs[int(np.argmin(test))])
    summary = {
        "q_min": q_min,
        "resplits": resplits,
        "seed": seed,
        "per_resplit_q_min": [r.q_min for r in results],
    }
    (out / "selection_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    click.echo(f"aggregated q_min = {q_min} over {resplits} resplit(s)")


@main.command()
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Figure directory (default: RUN_DIR).")
def report(run_dir, out_dir):
    """Render figures for the delimited outputs found in RUN_DIR."""
    from .report import render_metric_figures, render_selection_figures

    run = Path(run_dir)
    out = Path(out_dir) if out_dir else run
    written = []
    rows = []
    for name in ("report.csv", "timing.csv"):
        path = run / name
        if path.exists():
            with _guard(f"reading {path}"):
                rows.extend(read_report_csv(path))
    if rows:
        written.extend(render_metric_figures(rows, out))
    for csv_path in sorted(run.glob("*.csv")):
        if csv_path.name in ("report.csv", "timing.csv"):
            continue
        with open(csv_path) as fh:
            header = fh.readline().strip()
        if header != "q,mspe_train,mspe_test,seconds":
            continue
        with _guard(f"reading {csv_path}"):
            qs, train, test, seconds = read_selection_csv(csv_path)
        q_min = int(qs[int(np.argmin(test))]) if len(qs) else None
        written.extend(
            render_selection_figures(
                qs, train, test, seconds, out, stem=csv_path.stem, q_min=q_min
            )
        )
    if not written:
        raise _fail_invalid(f"no renderable outputs found in {run}")
    click.echo(f"wrote {len(written)} figure(s) to {out}")


if __name__ == "__main__":
    main()
