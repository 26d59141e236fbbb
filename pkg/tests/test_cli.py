"""End-to-end runs of the command-line interface against temporary files."""

import json

import numpy as np
import pytest
from click.testing import CliRunner
from numpy.testing import assert_allclose

from hybridfpca import (
    FofConfig,
    FofGenConfig,
    HybridGenConfig,
    coefficient_surface,
    fit_fof,
    fit_hpca,
    gen_fof,
    gen_hybrid,
    pool_to_curve,
    predict,
    read_functional_csv,
    read_hybrid_csv,
    reconstruct,
    write_functional_csv,
    write_hybrid_csv,
)
from hybridfpca.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_tiny_tensor(path, seed=3):
    tensor, _ = gen_hybrid(
        HybridGenConfig(n=8, n_regions=3, omega_points=9, s_points=9,
                        k_true=2, l_true=2, m_true=2, seed=seed)
    )
    write_hybrid_csv(path, tensor)
    return tensor


def write_regression_files(directory, n=12, p=2, seed=4):
    predictors, response, _ = gen_fof(
        FofGenConfig(n=n, p=p, g_points=9, s_points=9, seed=seed)
    )
    response_path = directory / "response.csv"
    write_functional_csv(response_path, response)
    predictor_paths = []
    for j, sample in enumerate(predictors, start=1):
        path = directory / f"predictor_{j}.csv"
        write_functional_csv(path, sample)
        predictor_paths.append(path)
    return response_path, predictor_paths, response, predictors


TINY_CONFIG = {
    "replicates": 2,
    "n_values": [8],
    "seed": 5,
    "hybrid": {"n_regions": 3, "omega_points": 9, "s_points": 9,
               "k_true": 2, "l_true": 2, "m_true": 2},
    "fof": {"p": 2, "g_points": 9, "s_points": 9},
    "fof_config": {"n_basis_g": 4, "n_basis_s": 4, "seed": 3},
}

FOF_JSON = {"n_basis_g": 4, "n_basis_s": 4, "seed": 11}


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert "hybridfpca" in result.output


def test_bad_log_level_exits_2(runner, tmp_path):
    result = runner.invoke(
        main, ["report", str(tmp_path)], env={"HYBRIDFPCA_LOG": "chatty"}
    )
    assert result.exit_code == 2
    assert "HYBRIDFPCA_LOG" in result.output


def test_malformed_json_reports_position(runner, tmp_path):
    bad = tmp_path / "config.json"
    bad.write_text('{"replicates": 2,\n  "n_values": [8,]\n}\n')
    result = runner.invoke(
        main, ["simulate", "--scenario", "2", "--config", str(bad), "--out", str(tmp_path / "out")]
    )
    assert result.exit_code == 2
    assert "line 2" in result.output and "column" in result.output


def test_simulate_writes_study_outputs(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(TINY_CONFIG))
    out = tmp_path / "run"
    result = runner.invoke(
        main,
        ["simulate", "--scenario", "2", "--config", str(config),
         "--threads", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert (out / "report.csv").exists()
    assert (out / "timing.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"] == 2
    assert manifest["seed"] == 5
    assert "wrote" in result.output


def test_simulate_report_is_reproducible_across_threads(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(TINY_CONFIG))
    contents = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["simulate", "--scenario", "1", "--config", str(config),
             "--threads", threads, "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        contents.append((out / "report.csv").read_bytes())
    assert contents[0] == contents[1] == contents[2]


def test_simulate_seed_option_overrides_config(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(TINY_CONFIG))
    out = tmp_path / "run"
    result = runner.invoke(
        main,
        ["simulate", "--scenario", "2", "--config", str(config),
         "--seed", "9", "--threads", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert json.loads((out / "manifest.json").read_text())["seed"] == 9


def test_decompose_then_pool_model_matches_library(runner, tmp_path):
    tensor_path = tmp_path / "tensor.csv"
    write_tiny_tensor(tensor_path)
    model_dir = tmp_path / "model"
    result = runner.invoke(
        main, ["decompose", str(tensor_path), "--fve", "1.0", "--out", str(model_dir)]
    )
    assert result.exit_code == 0, result.output
    assert "components" in result.output

    pooled_path = tmp_path / "pooled.csv"
    result = runner.invoke(
        main, ["pool", "--model", str(model_dir), "--out", str(pooled_path)]
    )
    assert result.exit_code == 0, result.output

    tensor, _ = read_hybrid_csv(tensor_path)
    model = fit_hpca(tensor, fve_target=1.0)
    expected = pool_to_curve(reconstruct(model, model.n_components))
    sample, _ = read_functional_csv(pooled_path)
    assert_allclose(sample.curves, expected.curves, atol=1e-10)


def test_pool_raw_tensor_keeps_subject_ids(runner, tmp_path):
    tensor_path = tmp_path / "tensor.csv"
    tensor = write_tiny_tensor(tensor_path, seed=6)
    out_path = tmp_path / "pooled.csv"
    result = runner.invoke(main, ["pool", str(tensor_path), "--out", str(out_path)])
    assert result.exit_code == 0, result.output
    sample, subjects = read_functional_csv(out_path)
    assert subjects == [str(i + 1) for i in range(tensor.n_subjects)]
    assert_allclose(sample.curves, pool_to_curve(tensor).curves, atol=1e-12)


def test_pool_requires_exactly_one_source(runner, tmp_path):
    tensor_path = tmp_path / "tensor.csv"
    write_tiny_tensor(tensor_path)
    result = runner.invoke(
        main,
        ["pool", str(tensor_path), "--model", str(tmp_path), "--out", str(tmp_path / "x.csv")],
    )
    assert result.exit_code == 2
    result = runner.invoke(main, ["pool", "--out", str(tmp_path / "x.csv")])
    assert result.exit_code == 2
    result = runner.invoke(
        main, ["pool", str(tensor_path), "-q", "2", "--out", str(tmp_path / "x.csv")]
    )
    assert result.exit_code == 2
    assert "-q" in result.output


def test_fit_outputs_match_library(runner, tmp_path):
    response_path, predictor_paths, response, predictors = write_regression_files(tmp_path)
    config_path = tmp_path / "fof.json"
    config_path.write_text(json.dumps(FOF_JSON))
    out = tmp_path / "fit_out"
    result = runner.invoke(
        main,
        ["fit", str(response_path), *map(str, predictor_paths),
         "--config", str(config_path), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output

    model = fit_fof(response, predictors, FofConfig(**FOF_JSON))
    expected = predict(model, predictors)
    sample, _ = read_functional_csv(out / "predictions.csv")
    assert_allclose(sample.curves, expected.curves, atol=1e-12)

    import csv

    with open(out / "beta_surfaces.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    n_g = len(predictors[0].grid.points)
    n_s = len(response.grid.points)
    for j in (1, 2):
        values = np.array(
            [float(r["value"]) for r in rows if int(r["predictor"]) == j]
        ).reshape(n_g, n_s)
        assert_allclose(values, coefficient_surface(model, j), atol=1e-12)

    intercept_rows = list(csv.DictReader(open(out / "model" / "intercept.csv")))
    intercept = np.array([float(r["value"]) for r in intercept_rows])
    assert_allclose(intercept, response.curves.mean(axis=0), atol=1e-12)


def test_fit_rejects_subject_mismatch_between_predictors(runner, tmp_path):
    response_path, predictor_paths, _, predictors = write_regression_files(tmp_path)
    renamed = tmp_path / "renamed.csv"
    write_functional_csv(
        renamed, predictors[1], subjects=[f"s{i}" for i in range(predictors[1].n_subjects)]
    )
    result = runner.invoke(
        main,
        ["fit", str(response_path), str(predictor_paths[0]), str(renamed),
         "--out", str(tmp_path / "out")],
    )
    assert result.exit_code == 2
    assert "differ" in result.output


def test_fit_rejects_missing_predictor_file(runner, tmp_path):
    response_path, predictor_paths, _, _ = write_regression_files(tmp_path)
    result = runner.invoke(
        main,
        ["fit", str(response_path), str(tmp_path / "absent.csv"), "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 2


def test_select_rejects_tensor_predictor_mismatch(runner, tmp_path):
    tensor_path = tmp_path / "tensor.csv"
    write_tiny_tensor(tensor_path)
    predictors, _, _ = gen_fof(FofGenConfig(n=8, p=1, g_points=9, s_points=9, seed=1))
    predictor_path = tmp_path / "pred.csv"
    write_functional_csv(predictor_path, predictors[0], subjects=[f"x{i}" for i in range(8)])
    result = runner.invoke(
        main, ["select", str(tensor_path), str(predictor_path), "--out", str(tmp_path / "o")]
    )
    assert result.exit_code == 2
    assert "subject mismatch" in result.output


def test_select_is_idempotent(runner, tmp_path):
    tensor_path = tmp_path / "tensor.csv"
    tensor = write_tiny_tensor(tensor_path)
    pooled = pool_to_curve(tensor)
    predictor_path = tmp_path / "pred.csv"
    rng = np.random.default_rng(0)
    from hybridfpca import FunctionalSample, make_trapezoid_grid

    g_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, 7))
    curves = np.outer(pooled.curves.mean(axis=1), np.ones(7)) + 0.1 * rng.normal(size=(8, 7))
    write_functional_csv(predictor_path, FunctionalSample(curves=curves, grid=g_grid))
    config_path = tmp_path / "fof.json"
    config_path.write_text(json.dumps({"n_basis_g": 4, "n_basis_s": 4}))

    from hybridfpca.selection import read_selection_csv

    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(
            main,
            ["select", str(tensor_path), str(predictor_path), "--config", str(config_path),
             "--seed", "7", "--resplits", "2", "--threads", "1", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "aggregated q_min" in result.output
        assert (out / "resplit_01.csv").exists()
        assert (out / "resplit_02.json").exists()
        qs, train, test, _ = read_selection_csv(out / "selection_aggregate.csv")
        outputs.append(
            (qs.tolist(), train.tolist(), test.tolist(),
             (out / "selection_summary.json").read_bytes())
        )
    # wall-clock medians vary run to run; everything else is bit-identical
    assert outputs[0] == outputs[1]
    summary = json.loads(outputs[0][3])
    assert summary["resplits"] == 2
    assert len(summary["per_resplit_q_min"]) == 2


def test_select_on_shipped_fixture_chooses_one_component(runner, fixture_paths, tmp_path):
    out = tmp_path / "sel"
    result = runner.invoke(
        main,
        ["select", str(fixture_paths["tensor"]),
         *[str(p) for p in fixture_paths["predictors"]],
         "--seed", "0", "--resplits", "2", "--threads", "1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    summary = json.loads((out / "selection_summary.json").read_text())
    assert summary["q_min"] == 1


def test_report_renders_figures_for_study_and_selection(runner, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(TINY_CONFIG))
    run = tmp_path / "run"
    result = runner.invoke(
        main,
        ["simulate", "--scenario", "2", "--config", str(config),
         "--threads", "1", "--out", str(run)],
    )
    assert result.exit_code == 0, result.output
    from hybridfpca.selection import write_selection_csv

    write_selection_csv(run / "scan.csv", [0, 1, 2], [0.4, 0.2, 0.3], [0.8, 0.3, 0.5], [0.1, 0.1, 0.1])
    figures = tmp_path / "figs"
    figures.mkdir()
    result = runner.invoke(main, ["report", str(run), "--out", str(figures)])
    assert result.exit_code == 0, result.output
    rendered = sorted(p.name for p in figures.glob("*.png"))
    assert any(name.startswith("report_scenario2") for name in rendered)
    assert "scan_mspe.png" in rendered
    assert "scan_seconds.png" in rendered


def test_report_with_nothing_to_render_exits_2(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    result = runner.invoke(main, ["report", str(empty)])
    assert result.exit_code == 2
    assert "no renderable outputs" in result.output


def test_commands_do_not_write_next_to_inputs(runner, tmp_path):
    inputs = tmp_path / "inputs"
    inputs.mkdir()
    tensor_path = inputs / "tensor.csv"
    write_tiny_tensor(tensor_path)
    before = sorted(p.name for p in inputs.iterdir())
    out = tmp_path / "out"
    result = runner.invoke(
        main, ["decompose", str(tensor_path), "--out", str(out / "model")]
    )
    assert result.exit_code == 0, result.output
    result = runner.invoke(
        main, ["pool", str(tensor_path), "--out", str(out / "pooled.csv")]
    )
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in inputs.iterdir()) == before
