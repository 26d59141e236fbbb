"""Seeded generators and the replicate study engine."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from hybridfpca import (
    FofConfig,
    FofGenConfig,
    HybridGenConfig,
    InvalidConfigError,
    ScenarioSettings,
    center,
    fit_hpca,
    gen_fof,
    gen_hybrid,
    reconstruct,
    run_scenario1,
    run_scenario2,
)
from hybridfpca.simgen import (
    CHI_COEF_SD,
    METRIC_ORDER_PREFIX,
    N_CHI_MODES,
    TIMING_METRICS,
    cosine_basis,
    evaluate_surface,
    full_scale_preset,
    mean_curve,
    settings_from_dict,
)
from hybridfpca.tensorcore import make_trapezoid_grid


def tiny_settings(**overrides):
    base = dict(
        replicates=2,
        n_values=(8,),
        seed=5,
        hybrid={"n_regions": 3, "omega_points": 9, "s_points": 9,
                "k_true": 2, "l_true": 2, "m_true": 2},
        fof={"p": 2, "g_points": 9, "s_points": 9},
        fof_config=FofConfig(n_basis_g=4, n_basis_s=4, seed=3),
    )
    base.update(overrides)
    return ScenarioSettings(**base)


# ---------------------------------------------------------------------------
# cosine family
# ---------------------------------------------------------------------------


def test_cosine_basis_orthonormal_under_trapezoid():
    grid = make_trapezoid_grid(np.linspace(0.0, 1.0, 21))
    basis = cosine_basis(grid.points, 5)
    gram = (basis * grid.weights[:, None]).T @ basis
    assert np.max(np.abs(gram - np.eye(5))) < 1e-10


# ---------------------------------------------------------------------------
# tensor generator
# ---------------------------------------------------------------------------


def test_gen_hybrid_is_deterministic():
    config = HybridGenConfig(n=6, omega_points=9, s_points=9, seed=21)
    t1, truth1 = gen_hybrid(config)
    t2, truth2 = gen_hybrid(config)
    assert_array_equal(t1.values, t2.values)
    assert_array_equal(truth1.signal, truth2.signal)
    assert_array_equal(truth1.scores, truth2.scores)


def test_gen_hybrid_complete_has_no_mask():
    tensor, _ = gen_hybrid(HybridGenConfig(n=5, omega_points=7, s_points=7, seed=0))
    assert tensor.observed_mask is None


def test_gen_hybrid_sparse_mask_counts_and_zeroing():
    config = HybridGenConfig(
        n=6, omega_points=11, s_points=7, omega_mode="sparse", omega_fraction=0.4, seed=3
    )
    tensor, _ = gen_hybrid(config)
    mask = tensor.observed_mask
    assert mask.shape == (6, 11)
    expected = max(2, int(round(0.4 * 11)))
    assert_array_equal(mask.sum(axis=1), np.full(6, expected))
    assert np.all(tensor.values[~mask[:, None, :, None] & np.ones_like(tensor.values, bool)] == 0)


def test_gen_hybrid_sparse_matches_complete_at_observed_slices():
    # the mask is drawn after the values, so a shared seed yields the same
    # tensor with unobserved slices zeroed
    kwargs = dict(n=5, omega_points=9, s_points=7, seed=17)
    complete, _ = gen_hybrid(HybridGenConfig(**kwargs))
    sparse, _ = gen_hybrid(HybridGenConfig(omega_mode="sparse", **kwargs))
    mask = sparse.observed_mask
    assert_array_equal(
        sparse.values, np.where(mask[:, None, :, None], complete.values, 0.0)
    )


def test_gen_hybrid_truth_reassembles_the_signal():
    config = HybridGenConfig(n=4, omega_points=9, s_points=8, noise_sd=0.0, seed=9)
    tensor, truth = gen_hybrid(config)
    assert_array_equal(tensor.values, truth.signal)
    xi = truth.scores.reshape(4, config.k_true, config.l_true, config.m_true)
    rebuilt = np.einsum(
        "iklm,rk,wl,sm->irws",
        xi,
        truth.region_vectors,
        truth.omega_functions,
        truth.s_functions,
    )
    assert_allclose(rebuilt, truth.signal, atol=1e-12)


def test_gen_hybrid_region_vectors_orthonormal_first_sums_to_zero():
    _, truth = gen_hybrid(HybridGenConfig(n=4, seed=2))
    v = truth.region_vectors
    assert_allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-12)
    assert abs(v[:, 0].sum()) < 1e-10


def test_gen_hybrid_config_validation():
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(n_regions=2, k_true=3)
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(omega_points=3, l_true=4)
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(noise_sd=-0.1)
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(omega_mode="partial")
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(omega_fraction=0.0)
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(k_true=1, l_true=1, m_true=2, score_sd=[[[1.0, 2.0]]])
    with pytest.raises(InvalidConfigError):
        HybridGenConfig(k_true=1, l_true=1, m_true=1, score_sd=[[[0.0]]])


def test_default_score_sd_decays_along_every_axis():
    sd = HybridGenConfig(k_true=3, l_true=2, m_true=3).resolved_score_sd()
    assert sd.shape == (3, 2, 3)
    for axis in range(3):
        assert np.all(np.diff(sd, axis=axis) < 0)
    assert sd[0, 0, 0] == pytest.approx(4.0)


def test_noiseless_tensor_is_fully_recovered_at_full_fve():
    config = HybridGenConfig(
        n=12, n_regions=4, omega_points=11, s_points=11, noise_sd=0.0, seed=31
    )
    tensor, _ = gen_hybrid(config)
    model = fit_hpca(tensor, fve_target=1.0)
    _, demeaned = center(tensor)
    rebuilt = reconstruct(model, model.n_components).values
    scale = np.max(np.abs(demeaned.values))
    assert np.max(np.abs(rebuilt - demeaned.values)) < 1e-6 * scale


def test_large_sample_recovers_the_top_score_variance():
    config = HybridGenConfig(
        n=200, n_regions=4, omega_points=11, s_points=11, noise_sd=0.0, seed=12
    )
    tensor, truth = gen_hybrid(config)
    model = fit_hpca(tensor, fve_target=0.99)
    top_empirical = float(np.var(truth.scores[:, 0]))
    assert model.score_variance[0] == pytest.approx(top_empirical, rel=0.2)


# ---------------------------------------------------------------------------
# regression generator
# ---------------------------------------------------------------------------


def test_gen_fof_is_deterministic():
    config = FofGenConfig(n=6, p=3, g_points=9, s_points=9, seed=8)
    preds1, resp1, truth1 = gen_fof(config)
    preds2, resp2, truth2 = gen_fof(config)
    assert_array_equal(resp1.curves, resp2.curves)
    for a, b in zip(preds1, preds2):
        assert_array_equal(a.curves, b.curves)
    assert_array_equal(truth1.theta_surfaces, truth2.theta_surfaces)


def test_gen_fof_shapes_and_chi_reconstruction():
    config = FofGenConfig(n=5, p=4, g_points=11, s_points=9, seed=2)
    predictors, response, truth = gen_fof(config)
    assert len(predictors) == 4
    assert response.curves.shape == (5, 9)
    assert truth.theta_surfaces.shape == (4, 11, 9)
    basis = cosine_basis(predictors[0].grid.points, N_CHI_MODES)
    for j, sample in enumerate(predictors):
        assert_allclose(sample.curves, truth.chi_coefficients[:, j, :] @ basis.T, atol=1e-12)


def test_gen_fof_half_sparse_zeroes_the_last_half():
    _, _, truth = gen_fof(FofGenConfig(n=5, p=10, coefficient_mode="half_sparse", seed=4))
    zero = [np.all(truth.theta_surfaces[j] == 0) for j in range(10)]
    assert zero[5:] == [True] * 5
    assert not any(zero[:5])


def test_gen_fof_zero_amplitude_response_is_the_mean_curve():
    config = FofGenConfig(n=4, p=3, s_points=13, surface_amplitude=0.0, noise_sd=0.0, seed=6)
    _, response, truth = gen_fof(config)
    expected = mean_curve(response.grid.points)
    assert_allclose(response.curves, np.tile(expected, (4, 1)), atol=1e-12)
    assert_array_equal(truth.noiseless, response.curves)


def test_gen_fof_noiseless_matches_a_refined_quadrature_oracle():
    # re-evaluate the response integral on a 10x finer g grid straight from
    # the stored truth; the cosine family renders both quadratures exact
    config = FofGenConfig(n=6, p=4, g_points=21, s_points=15, noise_sd=0.0, seed=14)
    _, response, truth = gen_fof(config)
    fine = make_trapezoid_grid(np.linspace(0.0, 1.0, 201))
    chi_fine = np.einsum(
        "iju,gu->ijg", truth.chi_coefficients, cosine_basis(fine.points, N_CHI_MODES)
    )
    theta_fine = np.stack(
        [evaluate_surface(t, fine.points, response.grid.points) for t in truth.surface_terms]
    )
    integral = np.einsum("ijg,g,jgs->is", chi_fine, fine.weights, theta_fine)
    oracle = mean_curve(response.grid.points)[None, :] + integral
    assert np.max(np.abs(oracle - truth.noiseless)) < 1e-4
    assert_array_equal(response.curves, truth.noiseless)


def test_gen_fof_coefficient_scale_ordering():
    _, _, truth = gen_fof(FofGenConfig(n=400, p=2, seed=3))
    spread = truth.chi_coefficients.std(axis=(0, 1))
    assert np.all(np.diff(spread) < 0)
    assert spread[0] == pytest.approx(CHI_COEF_SD[0], rel=0.2)


def test_gen_fof_config_validation():
    with pytest.raises(InvalidConfigError):
        FofGenConfig(p=0)
    with pytest.raises(InvalidConfigError):
        FofGenConfig(n=1)
    with pytest.raises(InvalidConfigError):
        FofGenConfig(coefficient_mode="sparse")
    with pytest.raises(InvalidConfigError):
        FofGenConfig(noise_sd=-1.0)


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------


def test_settings_presets():
    desk = settings_from_dict({})
    assert desk.replicates == 20
    assert desk.n_values == (20,)
    full = settings_from_dict({"preset": "full"})
    assert full.replicates == 100
    assert full.n_values == (20, 140)
    preset = full_scale_preset()
    assert (full.replicates, full.n_values) == (preset.replicates, preset.n_values)
    with pytest.raises(InvalidConfigError, match="desk"):
        settings_from_dict({"preset": "huge"})


def test_settings_overrides_and_coercion():
    settings = settings_from_dict(
        {
            "replicates": 3,
            "n_values": [8, 12],
            "seed": 11,
            "fof_config": {"n_basis_g": 5, "seed": 2},
        }
    )
    assert settings.replicates == 3
    assert settings.n_values == (8, 12)
    assert settings.fof_config.n_basis_g == 5
    assert settings.fof_config.seed == 2


def test_settings_rejections():
    with pytest.raises(InvalidConfigError):
        settings_from_dict({"bogus_key": 1})
    with pytest.raises(InvalidConfigError):
        settings_from_dict({"fof_config": 7})
    with pytest.raises(InvalidConfigError):
        settings_from_dict([1, 2])
    with pytest.raises(InvalidConfigError, match="set by the engine"):
        ScenarioSettings(hybrid={"n": 10})
    with pytest.raises(InvalidConfigError, match="set by the engine"):
        ScenarioSettings(fof={"seed": 1})
    with pytest.raises(InvalidConfigError, match="s grids"):
        ScenarioSettings(hybrid={"s_points": 9}, fof={"s_points": 11})
    with pytest.raises(InvalidConfigError):
        ScenarioSettings(replicates=0)
    with pytest.raises(InvalidConfigError):
        ScenarioSettings(n_values=())
    with pytest.raises(InvalidConfigError):
        ScenarioSettings(n_values=(3,))
    with pytest.raises(InvalidConfigError):
        ScenarioSettings(threads=0)


# ---------------------------------------------------------------------------
# replicate engine
# ---------------------------------------------------------------------------


def test_scenario1_row_structure():
    settings = tiny_settings()
    metric_rows, timing_rows, manifest = run_scenario1(settings)
    p = settings.fof["p"]
    cells = sorted({r.cell for r in metric_rows})
    assert cells == sorted(
        f"n8_omega_{om}_beta_{bm}"
        for om in ("complete", "sparse")
        for bm in ("complete", "half_sparse")
    )
    per_cell = [r.metric for r in metric_rows if r.cell == cells[0]]
    assert per_cell == [f"mse_beta_{j}" for j in (1, 2)] + METRIC_ORDER_PREFIX
    assert len(metric_rows) == len(cells) * (p + len(METRIC_ORDER_PREFIX))
    assert sorted({r.metric for r in timing_rows}) == sorted(TIMING_METRICS)
    assert manifest["scenario"] == 1
    assert manifest["replicates"] == 2
    assert set(manifest["completed"]) == set(cells)
    assert manifest["elapsed_seconds"] > 0
    assert "numpy" in manifest["versions"]
    for row in metric_rows:
        assert row.iterations + sum(
            1 for f in manifest["failures"] if f["cell"] == row.cell
        ) == settings.replicates


def test_scenario1_median_between_quartiles():
    metric_rows, _, _ = run_scenario1(tiny_settings(replicates=3))
    for row in metric_rows:
        assert row.q1 <= row.median <= row.q3


def test_single_replicate_collapses_the_quartiles():
    metric_rows, _, _ = run_scenario2(tiny_settings(replicates=1))
    for row in metric_rows:
        assert row.q1 == row.median == row.q3


def test_scenario2_cells_and_pairing():
    metric_rows, timing_rows, manifest = run_scenario2(tiny_settings())
    cells = {r.cell for r in metric_rows}
    assert cells == {
        f"pool_{arm}_beta_{bm}"
        for arm in ("raw", "first", "all")
        for bm in ("complete", "half_sparse")
    }
    assert manifest["scenario"] == 2
    assert {r.cell for r in timing_rows} == cells


def test_scenario2_deterministic_and_thread_independent():
    first, _, _ = run_scenario2(tiny_settings())
    second, _, _ = run_scenario2(tiny_settings())
    threaded, _, _ = run_scenario2(tiny_settings(threads=3))
    assert first == second
    assert first == threaded


def test_scenario1_deterministic_across_runs():
    first, _, _ = run_scenario1(tiny_settings())
    second, _, _ = run_scenario1(tiny_settings(threads=2))
    assert first == second


def test_scenario_seed_changes_the_report():
    base, _, _ = run_scenario2(tiny_settings())
    other, _, _ = run_scenario2(tiny_settings(seed=6))
    assert base != other
