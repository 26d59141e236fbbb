"""Function-on-multiple-functions linear regression.

Fits ``W_i(s) = m(s) + sum_j \\int chi_j(g) beta_j(g, s) dg + eps(s)`` with a
prediction-focused compression estimator: each predictor curve is reduced to
a few functional-PCA scores, the centered response is expanded in a B-spline
basis, and the response coefficients are regressed on the stacked scores with
a ridge penalty chosen by generalized cross-validation.  Coefficient surfaces
are assembled from the compression directions and regression weights on a
tensor-product spline basis.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline

from .errors import (
    IllPosedFitError,
    InvalidConfigError,
    InvalidDataError,
    ShapeMismatchError,
)
from .hpca import weighted_eigh
from .tensorcore import FLOAT_FMT, FunctionalSample, Grid1D, make_trapezoid_grid

__all__ = [
    "FofConfig",
    "FofModel",
    "PredictorCompression",
    "bspline_design",
    "fit_fof",
    "predict",
    "coefficient_surface",
    "train_test_split_indices",
    "save_fof_model",
    "load_fof_model",
]


def default_penalty_grid() -> np.ndarray:
    return np.logspace(-6, 2, 17)


@dataclass(frozen=True)
class FofConfig:
    """Estimator settings: basis sizes, compression level, penalty search, split."""

    n_basis_g: int = 15
    n_basis_s: int = 15
    predictor_fve: float = 0.9
    penalty_grid: np.ndarray = field(default_factory=default_penalty_grid)
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "penalty_grid", np.asarray(self.penalty_grid, dtype=float))
        if self.n_basis_g < 2 or self.n_basis_s < 2:
            raise InvalidConfigError("basis counts must be at least 2")
        if not 0 < self.predictor_fve <= 1:
            raise InvalidConfigError("predictor_fve must be in (0, 1]")
        if self.penalty_grid.size == 0:
            raise InvalidConfigError("penalty_grid must be nonempty")
        if np.any(self.penalty_grid <= 0) or np.any(np.diff(self.penalty_grid) < 0):
            raise InvalidConfigError("penalty_grid must be positive and sorted ascending")
        if not 0 < self.train_fraction < 1:
            raise InvalidConfigError("train_fraction must be in (0, 1)")


@dataclass(frozen=True)
class PredictorCompression:
    """Score map of one predictor: center at ``mean``, project on ``directions``."""

    mean: np.ndarray
    directions: np.ndarray  # (grid point, component); orthonormal under the g quadrature
    eigenvalues: np.ndarray


@dataclass
class FofModel:
    """Fitted regression: intercept curve, per-predictor surfaces, score maps."""

    intercept: np.ndarray
    coefficients: list[np.ndarray]  # per predictor, (n_basis_g, n_basis_s)
    compression: list[PredictorCompression]
    theta: list[np.ndarray]  # per predictor, (components, n_basis_s) regression weights
    chosen_penalty: float
    fit_diagnostics: dict
    g_grid: Grid1D
    s_grid: Grid1D
    knots_g: np.ndarray
    degree_g: int
    knots_s: np.ndarray
    degree_s: int
    config: FofConfig

    def __post_init__(self):
        if len(self.coefficients) < 1:
            raise InvalidConfigError("a fitted model needs at least one predictor surface")
        for a in self.coefficients:
            if not np.all(np.isfinite(a)):
                raise InvalidDataError("non-finite coefficient matrix")
        if not np.any(np.isclose(self.chosen_penalty, self.config.penalty_grid)):
            raise InvalidConfigError("chosen penalty must come from the penalty grid")

    @property
    def n_predictors(self) -> int:
        return len(self.coefficients)


def bspline_design(points: np.ndarray, n_basis: int) -> tuple[np.ndarray, np.ndarray, int]:
    """B-spline design matrix on ``points`` with equally spaced interior knots.

    Cubic by default; the degree drops to ``n_basis - 1`` when fewer than four
    basis functions are requested.  Returns (matrix, knot vector, degree).
    """
    points = np.asarray(points, dtype=float)
    if n_basis < 2:
        raise InvalidConfigError("need at least two basis functions")
    degree = min(3, n_basis - 1)
    n_interior = n_basis - degree - 1
    lo, hi = points[0], points[-1]
    interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
    knots = np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])
    design = BSpline.design_matrix(points, knots, degree).toarray()
    return design, knots, degree


def _design_from_knots(points, knots, degree) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    lo, hi = knots[0], knots[-1]
    if np.any(points < lo - 1e-12) or np.any(points > hi + 1e-12):
        raise InvalidConfigError(f"evaluation points must lie within [{lo:g}, {hi:g}]")
    return BSpline.design_matrix(np.clip(points, lo, hi), knots, degree).toarray()


def _weighted_lstsq(design: np.ndarray, weights: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Coefficients minimizing the quadrature-weighted residual, one column per target."""
    root = np.sqrt(weights)[:, None]
    sol, *_ = np.linalg.lstsq(root * design, root * targets, rcond=None)
    return sol


def _compress_predictor(
    curves: np.ndarray, grid: Grid1D, fve_target: float
) -> PredictorCompression:
    """Functional PCA of one predictor sample, truncated at ``fve_target``.

    A predictor with (numerically) no variance compresses to zero components
    and contributes nothing to the regression.
    """
    mean = curves.mean(axis=0)
    centered = curves - mean
    cov = np.einsum("ia,ib->ab", centered, centered) / curves.shape[0]
    lam, vectors = weighted_eigh(cov, grid.weights)
    lam = np.clip(lam, 0.0, None)
    total = lam.sum()
    if total <= 1e-12:
        keep = 0
    else:
        fve = np.cumsum(lam) / total
        keep = int(np.searchsorted(fve, fve_target - 1e-12) + 1)
        keep = min(keep, int(np.sum(lam > 1e-10 * lam[0])))
    return PredictorCompression(
        mean=mean, directions=vectors[:, :keep], eigenvalues=lam[:keep]
    )


def _predictor_scores(curves: np.ndarray, grid: Grid1D, comp: PredictorCompression) -> np.ndarray:
    """Quadrature projections of centered curves onto the compression directions."""
    if comp.directions.shape[1] == 0:
        return np.empty((curves.shape[0], 0))
    return (curves - comp.mean) @ (grid.weights[:, None] * comp.directions)


def _check_common_grid(predictors: list[FunctionalSample]) -> Grid1D:
    g_grid = predictors[0].grid
    for j, p in enumerate(predictors[1:], start=2):
        if not np.array_equal(p.grid.points, g_grid.points):
            raise ShapeMismatchError(f"predictor {j} is sampled on a different g grid")
    return g_grid


def fit_fof(
    responses: FunctionalSample, predictors: list[FunctionalSample], config: FofConfig
) -> FofModel:
    """Fit the compression-then-ridge estimator on the given subjects.

    The subjects passed in are the training sample; callers wanting a
    train/test protocol split beforehand (see
    :func:`train_test_split_indices`).  Ridge penalty is selected from
    ``config.penalty_grid`` by GCV on the response-coefficient regression.
    """
    if len(predictors) == 0:
        raise InvalidConfigError("need at least one predictor sample")
    n = responses.n_subjects
    for j, p in enumerate(predictors, start=1):
        if p.n_subjects != n:
            raise ShapeMismatchError(
                f"predictor {j} has {p.n_subjects} subjects, responses have {n}"
            )
    g_grid = _check_common_grid(predictors)
    s_grid = responses.grid

    mean_response = responses.curves.mean(axis=0)
    centered_response = responses.curves - mean_response

    basis_s, knots_s, degree_s = bspline_design(s_grid.points, config.n_basis_s)
    basis_g, knots_g, degree_g = bspline_design(g_grid.points, config.n_basis_g)
    # response curves -> spline coefficients, quadrature-weighted least squares
    resp_coef = _weighted_lstsq(basis_s, s_grid.weights, centered_response.T).T  # (n, n_basis_s)

    compression = [_compress_predictor(p.curves, g_grid, config.predictor_fve) for p in predictors]
    score_blocks = [_predictor_scores(p.curves, g_grid, c) for p, c in zip(predictors, compression)]
    block_sizes = [b.shape[1] for b in score_blocks]
    d_total = int(sum(block_sizes))
    if d_total >= n:
        raise IllPosedFitError(
            f"rank deficiency after compression: {n} subjects cannot identify "
            f"{d_total} predictor scores (per-predictor counts {block_sizes})"
        )
    scores = np.hstack(score_blocks) if d_total else np.empty((n, 0))

    penalties = config.penalty_grid
    if d_total == 0:
        theta_full = np.empty((0, config.n_basis_s))
        gcv_trace = [(float(lam), float(np.mean(resp_coef**2))) for lam in penalties]
        chosen = float(penalties[0])
    else:
        u, sing, vt = np.linalg.svd(scores, full_matrices=False)
        proj = u.T @ resp_coef
        gcv_trace = []
        best = None
        for lam in penalties:
            shrink = sing**2 / (sing**2 + lam)
            resid = resp_coef - u @ (shrink[:, None] * proj)
            rss = float(np.sum(resid**2))
            df = float(np.sum(shrink))
            gcv = (rss / (n * config.n_basis_s)) / (1.0 - df / n) ** 2
            gcv_trace.append((float(lam), gcv))
            if best is None or gcv < best[1]:
                best = (float(lam), gcv)
        chosen = best[0]
        factor = sing / (sing**2 + chosen)
        theta_full = vt.T @ (factor[:, None] * proj)  # (d_total, n_basis_s)

    theta = []
    offset = 0
    for size in block_sizes:
        theta.append(theta_full[offset : offset + size])
        offset += size

    coefficients = []
    for comp, th in zip(compression, theta):
        if comp.directions.shape[1] == 0:
            coefficients.append(np.zeros((config.n_basis_g, config.n_basis_s)))
        else:
            # compression directions expressed in the g spline basis
            direction_coef = _weighted_lstsq(basis_g, g_grid.weights, comp.directions)
            coefficients.append(direction_coef @ th)

    fitted = mean_response + (scores @ theta_full) @ basis_s.T
    train_mspe = float(np.mean((responses.curves - fitted) ** 2))
    model = FofModel(
        intercept=mean_response,
        coefficients=coefficients,
        compression=compression,
        theta=theta,
        chosen_penalty=chosen,
        fit_diagnostics={"train_mspe": train_mspe, "gcv": gcv_trace},
        g_grid=g_grid,
        s_grid=s_grid,
        knots_g=knots_g,
        degree_g=degree_g,
        knots_s=knots_s,
        degree_s=degree_s,
        config=config,
    )
    return model


def predict(model: FofModel, predictors: list[FunctionalSample]) -> FunctionalSample:
    """Predicted response curves for new predictor samples.

    Evaluates ``m(s) + sum_j \\int chi_j(g) beta_j(g, s) dg`` by quadrature,
    with each incoming predictor centered at its training mean (the
    coefficient surfaces are paired with centered predictors).
    """
    if len(predictors) != model.n_predictors:
        raise ShapeMismatchError(
            f"model has {model.n_predictors} predictors, got {len(predictors)} samples"
        )
    n = predictors[0].n_subjects
    basis_s = _design_from_knots(model.s_grid.points, model.knots_s, model.degree_s)
    total = np.tile(model.intercept, (n, 1))
    for p, comp, th in zip(predictors, model.compression, model.theta):
        if not np.array_equal(p.grid.points, model.g_grid.points):
            raise ShapeMismatchError("predictor grid does not match the training grid")
        if p.n_subjects != n:
            raise ShapeMismatchError("predictor samples must share one subject count")
        scores = _predictor_scores(p.curves, model.g_grid, comp)
        total += (scores @ th) @ basis_s.T
    return FunctionalSample(curves=total, grid=model.s_grid)


def coefficient_surface(model: FofModel, j: int, g_points=None, s_points=None) -> np.ndarray:
    """Evaluate the surface ``beta_j`` (1-based ``j``) on the requested grid."""
    if not 1 <= j <= model.n_predictors:
        raise InvalidConfigError(f"predictor index {j} out of range 1..{model.n_predictors}")
    g_points = model.g_grid.points if g_points is None else np.asarray(g_points, dtype=float)
    s_points = model.s_grid.points if s_points is None else np.asarray(s_points, dtype=float)
    bg = _design_from_knots(g_points, model.knots_g, model.degree_g)
    bs = _design_from_knots(s_points, model.knots_s, model.degree_s)
    return bg @ model.coefficients[j - 1] @ bs.T


def train_test_split_indices(
    n: int, train_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform subject-level split; both sides sorted, both nonempty."""
    if not 0 < train_fraction < 1:
        raise InvalidConfigError("train_fraction must be in (0, 1)")
    n_train = int(round(n * train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    if n < 2:
        raise InvalidConfigError("cannot split fewer than two subjects")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# Serialization: JSON manifest plus CSV matrices.
# ---------------------------------------------------------------------------


def save_fof_model(model: FofModel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": 1,
        "kind": "fof_model",
        "n_predictors": model.n_predictors,
        "chosen_penalty": model.chosen_penalty,
        "degree_g": model.degree_g,
        "degree_s": model.degree_s,
        "knots_g": list(model.knots_g),
        "knots_s": list(model.knots_s),
        "fit_diagnostics": {
            "train_mspe": model.fit_diagnostics["train_mspe"],
            "gcv": [list(pair) for pair in model.fit_diagnostics["gcv"]],
        },
        "config": {
            "n_basis_g": model.config.n_basis_g,
            "n_basis_s": model.config.n_basis_s,
            "predictor_fve": model.config.predictor_fve,
            "penalty_grid": list(model.config.penalty_grid),
            "train_fraction": model.config.train_fraction,
            "seed": model.config.seed,
        },
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    def rows_to(path, header, rows):
        with open(directory / path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)

    rows_to(
        "intercept.csv",
        ["s", "value"],
        ([FLOAT_FMT % s, FLOAT_FMT % v] for s, v in zip(model.s_grid.points, model.intercept)),
    )
    rows_to(
        "predictor_means.csv",
        ["predictor", "g", "value"],
        (
            [j + 1, FLOAT_FMT % g, FLOAT_FMT % v]
            for j, comp in enumerate(model.compression)
            for g, v in zip(model.g_grid.points, comp.mean)
        ),
    )
    rows_to(
        "compression.csv",
        ["predictor", "g", "component", "value"],
        (
            [j + 1, FLOAT_FMT % model.g_grid.points[i], d + 1, FLOAT_FMT % comp.directions[i, d]]
            for j, comp in enumerate(model.compression)
            for i in range(model.g_grid.size)
            for d in range(comp.directions.shape[1])
        ),
    )
    rows_to(
        "theta.csv",
        ["predictor", "component", "s_basis", "value"],
        (
            [j + 1, d + 1, b + 1, FLOAT_FMT % th[d, b]]
            for j, th in enumerate(model.theta)
            for d in range(th.shape[0])
            for b in range(th.shape[1])
        ),
    )
    rows_to(
        "coefficients.csv",
        ["predictor", "g_basis", "s_basis", "value"],
        (
            [j + 1, a + 1, b + 1, FLOAT_FMT % mat[a, b]]
            for j, mat in enumerate(model.coefficients)
            for a in range(mat.shape[0])
            for b in range(mat.shape[1])
        ),
    )


def load_fof_model(directory) -> FofModel:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("kind") != "fof_model":
        raise InvalidDataError(f"{directory}: manifest does not describe a fof model")
    cfg = manifest["config"]
    config = FofConfig(
        n_basis_g=cfg["n_basis_g"],
        n_basis_s=cfg["n_basis_s"],
        predictor_fve=cfg["predictor_fve"],
        penalty_grid=np.array(cfg["penalty_grid"]),
        train_fraction=cfg["train_fraction"],
        seed=cfg["seed"],
    )
    p = manifest["n_predictors"]

    def read(path):
        with open(directory / path, newline="") as fh:
            return list(csv.DictReader(fh))

    intercept_rows = read("intercept.csv")
    s_points = np.array([float(r["s"]) for r in intercept_rows])
    intercept = np.array([float(r["value"]) for r in intercept_rows])
    order = np.argsort(s_points)
    s_points, intercept = s_points[order], intercept[order]
    s_grid = make_trapezoid_grid(s_points)

    mean_rows = read("predictor_means.csv")
    g_points = np.array(sorted({float(r["g"]) for r in mean_rows}))
    g_grid = make_trapezoid_grid(g_points)
    g_idx = {v: i for i, v in enumerate(g_points)}
    means = np.zeros((p, g_points.size))
    for r in mean_rows:
        means[int(r["predictor"]) - 1, g_idx[float(r["g"])]] = float(r["value"])

    comp_counts = [0] * p
    comp_rows = read("compression.csv")
    for r in comp_rows:
        comp_counts[int(r["predictor"]) - 1] = max(
            comp_counts[int(r["predictor"]) - 1], int(r["component"])
        )
    directions = [np.zeros((g_points.size, c)) for c in comp_counts]
    for r in comp_rows:
        directions[int(r["predictor"]) - 1][g_idx[float(r["g"])], int(r["component"]) - 1] = float(
            r["value"]
        )

    theta = [np.zeros((comp_counts[j], config.n_basis_s)) for j in range(p)]
    for r in read("theta.csv"):
        theta[int(r["predictor"]) - 1][int(r["component"]) - 1, int(r["s_basis"]) - 1] = float(
            r["value"]
        )
    coefficients = [np.zeros((config.n_basis_g, config.n_basis_s)) for _ in range(p)]
    for r in read("coefficients.csv"):
        coefficients[int(r["predictor"]) - 1][int(r["g_basis"]) - 1, int(r["s_basis"]) - 1] = float(
            r["value"]
        )

    compression = [
        PredictorCompression(mean=means[j], directions=directions[j], eigenvalues=np.array([]))
        for j in range(p)
    ]
    return FofModel(
        intercept=intercept,
        coefficients=coefficients,
        compression=compression,
        theta=theta,
        chosen_penalty=manifest["chosen_penalty"],
        fit_diagnostics={
            "train_mspe": manifest["fit_diagnostics"]["train_mspe"],
            "gcv": [tuple(pair) for pair in manifest["fit_diagnostics"]["gcv"]],
        },
        g_grid=g_grid,
        s_grid=s_grid,
        knots_g=np.array(manifest["knots_g"]),
        degree_g=manifest["degree_g"],
        knots_s=np.array(manifest["knots_s"]),
        degree_s=manifest["degree_s"],
        config=config,
    )
