"""Synthetic data generators and the replicate study engine.

Two generators: ``gen_hybrid`` draws subject x region x omega x s tensors
from a separable product-basis model with optional sparse omega observation,
and ``gen_fof`` draws functional predictors with a curve response assembled
from known coefficient surfaces.  ``run_scenario1`` and ``run_scenario2``
repeat the full pipeline over seeded replicates and aggregate each metric to
median and quartiles per design cell.

Determinism: every replicate consumes its own pre-spawned RNG stream, so
reports are bit-identical across runs and across thread counts.  Wall-clock
and CPU timings are inherently non-deterministic and are therefore kept in
separate timing rows, never in the metric report.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import metadata as importlib_metadata

import numpy as np

from .errors import HybridFpcaError, InvalidConfigError
from .fofreg import (
    FofConfig,
    coefficient_surface,
    fit_fof,
    predict,
    train_test_split_indices,
)
from .hpca import fit_hpca, reconstruct
from .metrics import (
    ReportRow,
    percentile_summary,
    prediction_correlation,
    prediction_mspe,
    timed,
)
from .pooling import pool_to_curve
from .tensorcore import FunctionalSample, HybridTensor, make_trapezoid_grid

__all__ = [
    "HybridGenConfig",
    "FofGenConfig",
    "HybridTruth",
    "FofTruth",
    "ScenarioSettings",
    "cosine_basis",
    "gen_hybrid",
    "gen_fof",
    "run_scenario1",
    "run_scenario2",
    "full_scale_preset",
    "settings_from_dict",
]


def cosine_basis(points, n_modes: int) -> np.ndarray:
    """First ``n_modes`` of the orthonormal half-range cosine family on [0, 1].

    Column 0 is the constant 1; column u is sqrt(2) cos(u pi t).  Products of
    family members integrate essentially exactly under uniform trapezoid
    quadrature, which keeps generated integrals faithful on coarse grids.
    """
    t = np.asarray(points, dtype=float)
    out = np.empty((t.size, n_modes))
    out[:, 0] = 1.0
    for u in range(1, n_modes):
        out[:, u] = np.sqrt(2.0) * np.cos(u * np.pi * t)
    return out


def _default_score_sd(k: int, l: int, m: int, base: float = 4.0):
    # region and s factors decay past the 90% FVE line at their third
    # index, so fits truncate those layers and reconstructions carry
    # less content than the raw tensor
    k_factor = np.cumprod(np.concatenate([[1.0, 0.7], np.full(max(k - 2, 0), 0.45)]))[:k]
    a, b, c = np.ix_(np.arange(k), np.arange(l), np.arange(m))
    return base * k_factor[a] * 0.7**b * 0.55**c


def _sign_fix(columns: np.ndarray) -> np.ndarray:
    out = columns.copy()
    for j in range(out.shape[1]):
        if out[np.argmax(np.abs(out[:, j])), j] < 0:
            out[:, j] = -out[:, j]
    return out


@dataclass(frozen=True)
class HybridGenConfig:
    """Tensor generator settings.

    ``seed`` accepts an integer or a ``numpy.random.SeedSequence`` so that
    replicate engines can hand each draw an independent stream.
    """

    n: int = 20
    n_regions: int = 4
    omega_points: int = 21
    s_points: int = 21
    k_true: int = 3
    l_true: int = 2
    m_true: int = 3
    score_sd: np.ndarray | None = None
    noise_sd: float = 0.5
    omega_mode: str = "complete"
    omega_fraction: float = 0.5
    seed: object = 0

    def __post_init__(self):
        if min(self.k_true, self.l_true, self.m_true) < 1:
            raise InvalidConfigError("true ranks must be at least 1")
        if self.n < 2 or self.n_regions < 1:
            raise InvalidConfigError("need n >= 2 subjects and at least one region")
        if self.omega_points < 2 or self.s_points < 2:
            raise InvalidConfigError("functional grids need at least 2 points")
        if self.k_true > self.n_regions:
            raise InvalidConfigError("cannot orthonormalize more region vectors than regions")
        if self.l_true > self.omega_points or self.m_true > self.s_points:
            raise InvalidConfigError("true functional ranks exceed grid resolution")
        if self.noise_sd < 0:
            raise InvalidConfigError("noise_sd must be nonnegative")
        if self.omega_mode not in ("complete", "sparse"):
            raise InvalidConfigError(f"unknown omega_mode {self.omega_mode!r}")
        if not 0 < self.omega_fraction <= 1:
            raise InvalidConfigError("omega_fraction must be in (0, 1]")
        sd = self.score_sd
        if sd is not None:
            sd = np.asarray(sd, dtype=float)
            if sd.shape != (self.k_true, self.l_true, self.m_true):
                raise InvalidConfigError("score_sd must have shape (k_true, l_true, m_true)")
            if np.any(sd <= 0):
                raise InvalidConfigError("score sds must be positive")
            for axis in range(3):
                if np.any(np.diff(sd, axis=axis) > 1e-12):
                    raise InvalidConfigError("score sds must decay along every index")
            object.__setattr__(self, "score_sd", sd)

    def resolved_score_sd(self) -> np.ndarray:
        if self.score_sd is not None:
            return self.score_sd
        return _default_score_sd(self.k_true, self.l_true, self.m_true)


@dataclass(frozen=True)
class HybridTruth:
    """Ground truth behind one generated tensor: bases, scores, clean signal."""

    region_vectors: np.ndarray  # (region, k)
    omega_functions: np.ndarray  # (omega point, l)
    s_functions: np.ndarray  # (s point, m)
    scores: np.ndarray  # (subject, k*l*m), ranking order
    ranking: tuple
    score_sd: np.ndarray
    signal: np.ndarray  # noiseless, unmasked (subject, region, omega, s)


def gen_hybrid(config: HybridGenConfig) -> tuple[HybridTensor, HybridTruth]:
    """Draw a tensor sample ``sum_klm xi Vk(r) phil(omega) psim(s) + noise``.

    Region vectors are orthonormalized Gaussian draws with the first one
    constrained to sum to zero across regions: the dominant region pattern is
    a contrast (as in bipolar topographies), so it vanishes under regional
    averaging.  Sparse mode masks each subject down to a random subset of
    omega slices; masked values are zeroed.
    """
    rng = np.random.default_rng(config.seed)
    k, l, m = config.k_true, config.l_true, config.m_true
    omega_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, config.omega_points))
    s_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, config.s_points))

    raw = rng.normal(size=(config.n_regions, k))
    if config.n_regions > 1:
        raw[:, 0] -= raw[:, 0].mean()
    v, _ = np.linalg.qr(raw)
    v = _sign_fix(v[:, :k])
    phi = cosine_basis(omega_grid.points, l)
    psi = cosine_basis(s_grid.points, m)

    sd = config.resolved_score_sd()
    xi = rng.normal(size=(config.n, k, l, m)) * sd[None, :, :, :]
    signal = np.einsum("iklm,rk,wl,sm->irws", xi, v, phi, psi)
    values = signal.copy()
    if config.noise_sd > 0:
        values = values + rng.normal(0.0, config.noise_sd, size=values.shape)

    mask = None
    if config.omega_mode == "sparse":
        n_obs = max(2, int(round(config.omega_fraction * config.omega_points)))
        mask = np.zeros((config.n, config.omega_points), dtype=bool)
        for i in range(config.n):
            keep = rng.choice(config.omega_points, size=n_obs, replace=False)
            mask[i, np.sort(keep)] = True
        values = np.where(mask[:, None, :, None], values, 0.0)

    tensor = HybridTensor(
        values=values, omega_grid=omega_grid, s_grid=s_grid, observed_mask=mask
    )
    ranking = tuple(
        (a + 1, b + 1, c + 1) for a in range(k) for b in range(l) for c in range(m)
    )
    truth = HybridTruth(
        region_vectors=v,
        omega_functions=phi,
        s_functions=psi,
        scores=xi.reshape(config.n, k * l * m),
        ranking=ranking,
        score_sd=sd,
        signal=signal,
    )
    return tensor, truth


N_CHI_MODES = 4
CHI_COEF_SD = (1.0, 0.22, 0.05, 0.011)
N_SURFACE_S_MODES = 5


@dataclass(frozen=True)
class FofGenConfig:
    """Predictor/response generator settings for the regression scenarios."""

    n: int = 20
    p: int = 10
    g_points: int = 21
    s_points: int = 21
    coefficient_mode: str = "complete"
    noise_sd: float = 0.05
    surface_amplitude: float = 1.0
    seed: object = 0

    def __post_init__(self):
        if self.p < 1:
            raise InvalidConfigError("need at least one predictor")
        if self.n < 2:
            raise InvalidConfigError("need at least two subjects")
        if self.g_points < 2 or self.s_points < 2:
            raise InvalidConfigError("functional grids need at least 2 points")
        if self.coefficient_mode not in ("complete", "half_sparse"):
            raise InvalidConfigError(f"unknown coefficient_mode {self.coefficient_mode!r}")
        if self.noise_sd < 0:
            raise InvalidConfigError("noise_sd must be nonnegative")


@dataclass(frozen=True)
class FofTruth:
    """Known pieces behind one regression draw.

    ``surface_terms[j]`` lists ``(amplitude, g_mode, s_mode)`` rank-one terms
    of surface j in the cosine family, usable to re-evaluate the surface
    analytically on any grid.
    """

    m_curve: np.ndarray
    theta_surfaces: np.ndarray  # (predictor, g point, s point)
    surface_terms: tuple
    chi_coefficients: np.ndarray  # (subject, predictor, mode)
    noiseless: np.ndarray  # (subject, s point)


def mean_curve(s_points) -> np.ndarray:
    """The fixed intercept curve used by the generator: 1 + 0.5 sqrt(2) cos(pi s)."""
    basis = cosine_basis(s_points, 2)
    return basis[:, 0] + 0.5 * basis[:, 1]


def evaluate_surface(terms, g_points, s_points) -> np.ndarray:
    """Analytic evaluation of one rank-structured surface on arbitrary grids."""
    g_basis = cosine_basis(g_points, N_CHI_MODES)
    s_basis = cosine_basis(s_points, N_SURFACE_S_MODES)
    out = np.zeros((np.size(g_points), np.size(s_points)))
    for amplitude, g_mode, s_mode in terms:
        out += amplitude * np.outer(g_basis[:, g_mode], s_basis[:, s_mode])
    return out


def gen_fof(config: FofGenConfig) -> tuple[list[FunctionalSample], FunctionalSample, FofTruth]:
    """Draw predictors and assemble the response by quadrature.

    Each predictor is a short cosine series with sharply decaying coefficient
    scales, so one compression direction per predictor carries most of its
    variance.  Each coefficient surface has two rank-one terms: one on the
    constant g mode (predictable from the dominant predictor direction) and
    one on a higher mode.  ``half_sparse`` zeroes the last half of the
    surfaces.  The response integral uses the g grid's trapezoid weights.
    """
    rng = np.random.default_rng(config.seed)
    g_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, config.g_points))
    s_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, config.s_points))

    terms = []
    for j in range(config.p):
        # stable magnitudes with random signs keep the signal power, and
        # with it the replicate spread of every error metric, predictable
        amp = rng.choice([-1.0, 1.0], size=2) * rng.uniform(0.75, 1.25, size=2)
        amp *= config.surface_amplitude
        g_mode_high = int(rng.integers(1, N_CHI_MODES))
        s_modes = rng.integers(0, N_SURFACE_S_MODES, size=2)
        zero = config.coefficient_mode == "half_sparse" and j >= config.p - config.p // 2
        if zero:
            amp = np.zeros(2)
        terms.append(
            (
                (float(amp[0]), 0, int(s_modes[0])),
                (float(amp[1]), g_mode_high, int(s_modes[1])),
            )
        )
    terms = tuple(terms)
    theta = np.stack(
        [evaluate_surface(t, g_grid.points, s_grid.points) for t in terms]
    )

    coef_sd = np.array(CHI_COEF_SD)
    chi_coef = rng.normal(size=(config.n, config.p, N_CHI_MODES)) * coef_sd
    chi_basis = cosine_basis(g_grid.points, N_CHI_MODES)
    chi = np.einsum("iju,gu->ijg", chi_coef, chi_basis)

    m_s = mean_curve(s_grid.points)
    integral = np.einsum("ijg,g,jgs->is", chi, g_grid.weights, theta)
    noiseless = m_s[None, :] + integral
    response = noiseless.copy()
    if config.noise_sd > 0:
        response = response + rng.normal(0.0, config.noise_sd, size=response.shape)

    predictors = [
        FunctionalSample(curves=chi[:, j, :], grid=g_grid) for j in range(config.p)
    ]
    sample = FunctionalSample(curves=response, grid=s_grid)
    truth = FofTruth(
        m_curve=m_s,
        theta_surfaces=theta,
        surface_terms=terms,
        chi_coefficients=chi_coef,
        noiseless=noiseless,
    )
    return predictors, sample, truth


# ---------------------------------------------------------------------------
# Replicate engine.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioSettings:
    """One simulation study: replicate count, sample sizes, generator knobs.

    ``hybrid`` and ``fof`` hold keyword overrides forwarded to the generator
    configs (grid sizes, noise levels, ranks); ``fof_config`` controls the
    regression estimator.  Desk scale by default; :func:`full_scale_preset` gives
    the full-size study.
    """

    replicates: int = 20
    n_values: tuple[int, ...] = (20,)
    seed: int = 0
    threads: int = 1
    fve_target: float = 0.9
    hybrid: dict = field(default_factory=dict)
    fof: dict = field(default_factory=dict)
    fof_config: FofConfig = field(default_factory=FofConfig)

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidConfigError("need at least one replicate")
        if len(self.n_values) == 0:
            raise InvalidConfigError("n_values must be nonempty")
        if any(n < 4 for n in self.n_values):
            raise InvalidConfigError("each sample size must be at least 4 (a split must fit)")
        if self.threads < 1:
            raise InvalidConfigError("threads must be at least 1")
        reserved = {"n", "seed", "omega_mode", "coefficient_mode"}
        clashes = (set(self.hybrid) | set(self.fof)) & reserved
        if clashes:
            raise InvalidConfigError(
                f"generator overrides {sorted(clashes)} are set by the engine"
            )
        h_s = self.hybrid.get("s_points", 21)
        f_s = self.fof.get("s_points", 21)
        if h_s != f_s:
            raise InvalidConfigError("hybrid and fof s grids must match to sum responses")


def full_scale_preset() -> ScenarioSettings:
    """The full-size study design: 100 replicates, n in {20, 140}."""
    return ScenarioSettings(replicates=100, n_values=(20, 140))


def settings_from_dict(raw: dict) -> ScenarioSettings:
    """Build settings from parsed JSON, starting from an optional named preset."""
    if not isinstance(raw, dict):
        raise InvalidConfigError("scenario config must be a JSON object")
    data = dict(raw)
    preset = data.pop("preset", "desk")
    if preset == "full":
        base = full_scale_preset()
    elif preset == "desk":
        base = ScenarioSettings()
    else:
        raise InvalidConfigError(f"unknown preset {preset!r}; use 'desk' or 'full'")
    known = {f.name for f in fields(ScenarioSettings)}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfigError(f"unknown scenario settings: {sorted(unknown)}")
    if "n_values" in data:
        data["n_values"] = tuple(int(v) for v in data["n_values"])
    if "fof_config" in data:
        if not isinstance(data["fof_config"], dict):
            raise InvalidConfigError("fof_config must be a JSON object")
        data["fof_config"] = FofConfig(**data["fof_config"])
    try:
        return replace(base, **data)
    except TypeError as exc:
        raise InvalidConfigError(str(exc)) from exc


METRIC_ORDER_PREFIX = ["mspe_pred_train", "mspe_pred_test", "cor_pred_train", "cor_pred_test"]
TIMING_METRICS = ["time_elapsed", "time_user", "time_system"]


def _fit_and_score(response, predictors, truth, train_idx, test_idx, fof_config):
    """One fit on the training split; returns the per-replicate metric dict."""
    train_resp = FunctionalSample(response.curves[train_idx], response.grid)
    train_preds = [FunctionalSample(p.curves[train_idx], p.grid) for p in predictors]
    test_preds = [FunctionalSample(p.curves[test_idx], p.grid) for p in predictors]
    with timed("fit") as clock:
        fitted = fit_fof(train_resp, train_preds, fof_config)
        predicted_train = predict(fitted, train_preds)
        predicted_test = predict(fitted, test_preds)
    out = {}
    for j in range(1, len(predictors) + 1):
        estimated = coefficient_surface(fitted, j)
        out[f"mse_beta_{j}"] = float(np.mean((truth.theta_surfaces[j - 1] - estimated) ** 2))
    out["mspe_pred_train"] = prediction_mspe(
        response.curves[train_idx], predicted_train.curves, split="train"
    )
    out["mspe_pred_test"] = prediction_mspe(
        response.curves[test_idx], predicted_test.curves, split="test"
    )
    out["cor_pred_train"] = prediction_correlation(
        response.curves[train_idx], predicted_train.curves
    )
    out["cor_pred_test"] = prediction_correlation(
        response.curves[test_idx], predicted_test.curves
    )
    out["time_elapsed"] = clock.elapsed
    out["time_user"] = clock.user if clock.user is not None else float("nan")
    out["time_system"] = clock.system if clock.system is not None else float("nan")
    return out


def _metric_names(p: int) -> list[str]:
    return [f"mse_beta_{j}" for j in range(1, p + 1)] + METRIC_ORDER_PREFIX


def _split_from(stream: np.random.SeedSequence, n: int, train_fraction: float):
    split_seed = int(stream.generate_state(1)[0])
    return train_test_split_indices(n, train_fraction, split_seed)


def _aggregate(scenario, cells, outcomes, p):
    """Quartile rows per cell, timing rows separate, completion counts."""
    metric_rows, timing_rows, completed = [], [], {}
    for cell in cells:
        values = [o for o in outcomes[cell] if o is not None]
        completed[cell] = len(values)
        if not values:
            continue
        for name in _metric_names(p):
            med, q1, q3 = percentile_summary([v[name] for v in values])
            metric_rows.append(ReportRow(scenario, cell, name, med, q1, q3, len(values)))
        for name in TIMING_METRICS:
            med, q1, q3 = percentile_summary([v[name] for v in values])
            timing_rows.append(ReportRow(scenario, cell, name, med, q1, q3, len(values)))
    return metric_rows, timing_rows, completed


def _run_tasks(task_fn, keys, threads):
    """Evaluate ``task_fn`` over keys, optionally threaded; merged by key order."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task_fn, keys))
    else:
        results = [task_fn(k) for k in keys]
    return dict(zip(keys, results))


def _package_versions() -> dict:
    out = {"numpy": np.__version__}
    try:
        import scipy

        out["scipy"] = scipy.__version__
    except ImportError:
        pass
    try:
        out["hybridfpca"] = importlib_metadata.version("hybridfpca")
    except importlib_metadata.PackageNotFoundError:
        out["hybridfpca"] = "unreleased"
    return out


def _manifest(scenario, settings, completed, failures, elapsed):
    return {
        "scenario": scenario,
        "seed": settings.seed,
        "replicates": settings.replicates,
        "n_values": list(settings.n_values),
        "threads": settings.threads,
        "completed": {cell: count for cell, count in completed.items()},
        "failures": failures,
        "elapsed_seconds": elapsed,
        "versions": _package_versions(),
    }


def run_scenario1(settings: ScenarioSettings):
    """Study of the raw pooled pipeline over the
    (sample size) x (omega completeness) x (surface sparsity) design.

    Per replicate: generate a tensor, pool it, add an independently generated
    regression response, split subjects 70/30, fit, score.  Returns
    ``(metric_rows, timing_rows, manifest)``.
    """
    started = time.perf_counter()
    cells = [
        (n, omega_mode, beta_mode)
        for n in settings.n_values
        for omega_mode in ("complete", "sparse")
        for beta_mode in ("complete", "half_sparse")
    ]
    master = np.random.SeedSequence(settings.seed)
    streams = master.spawn(len(cells) * settings.replicates)
    keys = [(cell, rep) for cell in cells for rep in range(settings.replicates)]
    stream_of = dict(zip(keys, streams))
    p = settings.fof.get("p", 10)
    failures = []

    def one(key):
        (n, omega_mode, beta_mode), rep = key
        hybrid_ss, fof_ss, split_ss = stream_of[key].spawn(3)
        try:
            tensor, _ = gen_hybrid(
                HybridGenConfig(n=n, omega_mode=omega_mode, seed=hybrid_ss, **settings.hybrid)
            )
            pooled = pool_to_curve(tensor)
            predictors, regression_part, truth = gen_fof(
                FofGenConfig(n=n, coefficient_mode=beta_mode, seed=fof_ss, **settings.fof)
            )
            response = FunctionalSample(
                pooled.curves + regression_part.curves, regression_part.grid
            )
            train_idx, test_idx = _split_from(
                split_ss, n, settings.fof_config.train_fraction
            )
            return _fit_and_score(
                response, predictors, truth, train_idx, test_idx, settings.fof_config
            )
        except (HybridFpcaError, np.linalg.LinAlgError) as exc:
            failures.append({"cell": _cell_name1(key[0]), "replicate": rep, "error": str(exc)})
            return None

    results = _run_tasks(one, keys, settings.threads)
    outcomes = {cell: [results[(cell, r)] for r in range(settings.replicates)] for cell in cells}
    named = {_cell_name1(c): outcomes[c] for c in cells}
    metric_rows, timing_rows, completed = _aggregate(
        "scenario1", [_cell_name1(c) for c in cells], named, p
    )
    manifest = _manifest(1, settings, completed, failures, time.perf_counter() - started)
    return metric_rows, timing_rows, manifest


def _cell_name1(cell) -> str:
    n, omega_mode, beta_mode = cell
    return f"n{n}_omega_{omega_mode}_beta_{beta_mode}"


ARMS = ("raw", "first", "all")


def run_scenario2(settings: ScenarioSettings):
    """Paired comparison of pooling the raw tensor, the one-component
    reconstruction, and the full retained reconstruction.

    Within a replicate the three arms share the tensor, the regression part,
    and the subject split; only the pooled tensor summand differs.  Uses the
    first entry of ``n_values``.  Returns ``(metric_rows, timing_rows,
    manifest)``.
    """
    started = time.perf_counter()
    n = settings.n_values[0]
    beta_modes = ("complete", "half_sparse")
    master = np.random.SeedSequence(settings.seed)
    streams = master.spawn(len(beta_modes) * settings.replicates)
    keys = [(bm, rep) for bm in beta_modes for rep in range(settings.replicates)]
    stream_of = dict(zip(keys, streams))
    p = settings.fof.get("p", 10)
    failures = []

    def one(key):
        beta_mode, rep = key
        hybrid_ss, fof_ss, split_ss = stream_of[key].spawn(3)
        arm_metrics = {}
        try:
            tensor, _ = gen_hybrid(HybridGenConfig(n=n, seed=hybrid_ss, **settings.hybrid))
            model = fit_hpca(tensor, fve_target=settings.fve_target)
            pooled_arm = {
                "raw": pool_to_curve(tensor),
                "first": pool_to_curve(reconstruct(model, 1)),
                "all": pool_to_curve(reconstruct(model, model.n_components)),
            }
            predictors, regression_part, truth = gen_fof(
                FofGenConfig(n=n, coefficient_mode=beta_mode, seed=fof_ss, **settings.fof)
            )
            train_idx, test_idx = _split_from(split_ss, n, settings.fof_config.train_fraction)
        except (HybridFpcaError, np.linalg.LinAlgError) as exc:
            for arm in ARMS:
                failures.append(
                    {"cell": _cell_name2(arm, beta_mode), "replicate": rep, "error": str(exc)}
                )
            return {arm: None for arm in ARMS}
        for arm in ARMS:
            response = FunctionalSample(
                pooled_arm[arm].curves + regression_part.curves, regression_part.grid
            )
            try:
                arm_metrics[arm] = _fit_and_score(
                    response, predictors, truth, train_idx, test_idx, settings.fof_config
                )
            except (HybridFpcaError, np.linalg.LinAlgError) as exc:
                failures.append(
                    {"cell": _cell_name2(arm, beta_mode), "replicate": rep, "error": str(exc)}
                )
                arm_metrics[arm] = None
        return arm_metrics

    results = _run_tasks(one, keys, settings.threads)
    cells = [_cell_name2(arm, bm) for bm in beta_modes for arm in ARMS]
    named = {
        _cell_name2(arm, bm): [results[(bm, r)][arm] for r in range(settings.replicates)]
        for bm in beta_modes
        for arm in ARMS
    }
    metric_rows, timing_rows, completed = _aggregate("scenario2", cells, named, p)
    manifest = _manifest(2, settings, completed, failures, time.perf_counter() - started)
    return metric_rows, timing_rows, manifest


def _cell_name2(arm: str, beta_mode: str) -> str:
    return f"pool_{arm}_beta_{beta_mode}"
