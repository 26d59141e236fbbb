"""Hybrid principal components analysis of region x longitudinal x functional data.

The decomposition estimates one marginal covariance per dimension, solves the
weighted eigenproblem of each, and expands every subject in the product basis

    Z_i[r, w, s] ~ sum_klm  xi[i, klm] * V_k[r] * phi_l[w] * psi_m[s]

with subject scores obtained by quadrature contraction.  Components are ranked
by descending empirical score variance so that prefix reconstructions are well
defined.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InvalidConfigError,
    InvalidDataError,
    NumericalFailureError,
    ShapeMismatchError,
)
from .tensorcore import FLOAT_FMT, Grid1D, HybridTensor, center, make_trapezoid_grid

__all__ = [
    "MarginalBasis",
    "HpcaModel",
    "marginal_covariance",
    "weighted_eigh",
    "eigendecompose_marginal",
    "compute_scores",
    "fit_hpca",
    "reconstruct",
    "save_hpca_model",
    "load_hpca_model",
]

DIMENSIONS = ("region", "omega", "s")

# Eigenvalues of an estimated covariance are nonnegative up to roundoff;
# anything below this is treated as a numerical failure rather than clamped.
EIGENVALUE_CLAMP = -1e-10


@dataclass(frozen=True)
class MarginalBasis:
    """Eigencomponents of one dimension's marginal covariance.

    ``vectors`` holds only the retained columns; ``eigenvalues`` and the
    cumulative ``fve`` sequence cover the full clamped spectrum so truncation
    diagnostics stay available.  Columns are orthonormal under the dimension's
    inner product, whose quadrature weights are kept in ``inner_weights``
    (all ones for the scalar region dimension).
    """

    dimension: str
    vectors: np.ndarray
    eigenvalues: np.ndarray
    fve: np.ndarray
    inner_weights: np.ndarray

    def __post_init__(self):
        if self.dimension not in DIMENSIONS:
            raise InvalidConfigError(f"unknown dimension {self.dimension!r}")
        for name in ("vectors", "eigenvalues", "fve", "inner_weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.vectors.ndim != 2:
            raise ShapeMismatchError("basis vectors must be 2-d (grid index, component)")
        if np.any(self.eigenvalues < 0) or np.any(np.diff(self.eigenvalues) > 0):
            raise InvalidDataError("eigenvalues must be nonnegative and descending")
        if np.any(np.diff(self.fve) < -1e-15) or self.fve[-1] > 1 + 1e-12:
            raise InvalidDataError("fve must be nondecreasing with last entry <= 1")
        if self.vectors.shape[1] > self.eigenvalues.size:
            raise ShapeMismatchError("more retained vectors than eigenvalues")

    @property
    def n_components(self) -> int:
        return self.vectors.shape[1]

    def orthonormality_defect(self) -> float:
        """Max deviation of the weighted Gram matrix from the identity."""
        gram = (self.vectors * self.inner_weights[:, None]).T @ self.vectors
        return float(np.max(np.abs(gram - np.eye(self.n_components))))


@dataclass(frozen=True)
class HpcaModel:
    """Fitted decomposition: mean, three marginal bases, ranked subject scores."""

    mean: np.ndarray
    basis_region: MarginalBasis
    basis_omega: MarginalBasis
    basis_s: MarginalBasis
    scores: np.ndarray
    ranking: tuple
    score_variance: np.ndarray
    omega_grid: Grid1D
    s_grid: Grid1D
    fve_target: float
    ranking_mode: str = "variance"

    def __post_init__(self):
        klm = self.K * self.L * self.M
        if len(self.ranking) != klm or len(set(self.ranking)) != klm:
            raise ShapeMismatchError("ranking must list each (k, l, m) triplet exactly once")
        if self.scores.shape[1] != klm:
            raise ShapeMismatchError("scores extent must be subjects x K*L*M")
        if self.ranking_mode == "variance" and np.any(np.diff(self.score_variance) > 1e-10):
            raise InvalidDataError("score variance must be nonincreasing along a variance ranking")

    @property
    def K(self) -> int:
        return self.basis_region.n_components

    @property
    def L(self) -> int:
        return self.basis_omega.n_components

    @property
    def M(self) -> int:
        return self.basis_s.n_components

    @property
    def n_components(self) -> int:
        return self.K * self.L * self.M

    @property
    def n_subjects(self) -> int:
        return self.scores.shape[0]


def _masked_values(tensor: HybridTensor) -> np.ndarray:
    """Values with unobserved slices zeroed; rejects NaN at observed positions."""
    z = tensor.values
    if tensor.observed_mask is not None:
        z = np.where(tensor.observed_mask[:, None, :, None], z, 0.0)
    if not np.all(np.isfinite(z)):
        raise InvalidDataError("hybrid tensor contains non-finite values")
    return z


def marginal_covariance(demeaned: HybridTensor, dimension: str) -> np.ndarray:
    """Marginal covariance of one dimension, contracting over the other two.

    For the s dimension:  C[a, b] = (1/n) sum_i (1/R) sum_r \\int Z_i(r, w, s_a)
    Z_i(r, w, s_b) dw, with quadrature over the contracted functional
    dimension(s) and plain averaging over regions.  With an omega sparsity
    mask, quadrature over omega uses per-subject weights on the observed
    points, and each entry of the omega covariance averages only the subjects
    observing both of its omega points.
    """
    if dimension not in DIMENSIONS:
        raise InvalidConfigError(f"unknown dimension {dimension!r}")
    z = _masked_values(demeaned)
    n, n_regions, _, _ = z.shape
    w_s = demeaned.s_grid.weights
    u = demeaned.subject_omega_weights()
    if dimension == "s":
        cov = np.einsum("iw,irwa,irwb->ab", u, z, z, optimize=True) / (n * n_regions)
    elif dimension == "omega":
        num = np.einsum("iras,irbs,s->ab", z, z, w_s, optimize=True) / n_regions
        if demeaned.observed_mask is None:
            cov = num / n
        else:
            m = demeaned.observed_mask.astype(float)
            counts = m.T @ m
            cov = np.divide(num, counts, out=np.zeros_like(num), where=counts > 0)
    else:
        cov = np.einsum("iw,iaws,ibws,s->ab", u, z, z, w_s, optimize=True) / n
    return (cov + cov.T) / 2.0


def weighted_eigh(cov: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the quadrature-weighted problem ``C W v = lam v``.

    Returns eigenvalues in descending order and eigenvectors orthonormal
    under ``diag(weights)``, each sign-fixed so its largest-magnitude entry
    is positive.
    """
    cov = np.asarray(cov, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeMismatchError("covariance must be square")
    if weights.shape != (cov.shape[0],):
        raise ShapeMismatchError("weights must match covariance extent")
    scale = np.max(np.abs(cov)) if cov.size else 0.0
    if scale > 0 and np.max(np.abs(cov - cov.T)) > 1e-8 * scale:
        raise InvalidDataError("covariance is not symmetric")
    root = np.sqrt(weights)
    sym = (cov + cov.T) / 2.0 * root[:, None] * root[None, :]
    lam, u = np.linalg.eigh(sym)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vectors = u[:, order] / root[:, None]
    for j in range(vectors.shape[1]):
        peak = np.argmax(np.abs(vectors[:, j]))
        if vectors[peak, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return lam, vectors


def eigendecompose_marginal(
    cov: np.ndarray, inner_product_weights: np.ndarray, fve_target: float, dimension: str = "s"
) -> MarginalBasis:
    """Decompose one marginal covariance and truncate at the FVE target.

    Retains the smallest component count whose cumulative fraction of
    variance reaches ``fve_target``; the full clamped spectrum is kept on the
    returned basis for diagnostics.
    """
    if not 0 < fve_target <= 1:
        raise InvalidConfigError(f"fve_target must be in (0, 1], got {fve_target}")
    lam, vectors = weighted_eigh(cov, inner_product_weights)
    if np.any(lam < EIGENVALUE_CLAMP):
        raise NumericalFailureError(
            f"covariance eigenvalue {lam.min():.3e} below clamp tolerance {EIGENVALUE_CLAMP:.0e}"
        )
    lam = np.where(lam < 0, 0.0, lam)
    total = lam.sum()
    if total <= 0:
        raise InvalidDataError("covariance carries no variance; cannot form a basis")
    fve = np.cumsum(lam) / total
    n_keep = int(np.searchsorted(fve, fve_target - 1e-12) + 1)
    n_keep = min(n_keep, lam.size)
    return MarginalBasis(
        dimension=dimension,
        vectors=vectors[:, :n_keep],
        eigenvalues=lam,
        fve=fve,
        inner_weights=np.asarray(inner_product_weights, dtype=float),
    )


def compute_scores(
    demeaned: HybridTensor,
    basis_region: MarginalBasis,
    basis_omega: MarginalBasis,
    basis_s: MarginalBasis,
) -> np.ndarray:
    """Subject scores ``xi[i, k, l, m]`` by triple contraction with quadrature.

    Plain summation over regions, quadrature over omega and s; with an omega
    sparsity mask the omega quadrature uses each subject's observed points.
    """
    z = _masked_values(demeaned)
    n, n_regions, n_omega, n_s = z.shape
    if basis_region.vectors.shape[0] != n_regions:
        raise ShapeMismatchError("region basis does not match tensor extent")
    if basis_omega.vectors.shape[0] != n_omega:
        raise ShapeMismatchError("omega basis does not match tensor extent")
    if basis_s.vectors.shape[0] != n_s:
        raise ShapeMismatchError("s basis does not match tensor extent")
    u = demeaned.subject_omega_weights()
    w_s = demeaned.s_grid.weights
    return np.einsum(
        "irws,rk,wl,sm,iw,s->iklm",
        z,
        basis_region.vectors,
        basis_omega.vectors,
        basis_s.vectors,
        u,
        w_s,
        optimize=True,
    )


def _rank_triplets(variances: np.ndarray, mode: str) -> list[tuple[int, int, int]]:
    """Order 1-based (k, l, m) triplets for prefix reconstruction."""
    K, L, M = variances.shape
    triplets = [(k + 1, l + 1, m + 1) for k in range(K) for l in range(L) for m in range(M)]
    if mode == "variance":
        triplets.sort(key=lambda t: (-variances[t[0] - 1, t[1] - 1, t[2] - 1], t))
    elif mode == "lexicographic":
        triplets.sort()
    else:
        raise InvalidConfigError(f"unknown ranking mode {mode!r}")
    return triplets


def fit_hpca(tensor: HybridTensor, fve_target: float = 0.9, ranking: str = "variance") -> HpcaModel:
    """Full decomposition pipeline: center, marginal eigenbases, ranked scores.

    Each marginal basis is truncated at ``fve_target`` of its dimension's
    variance.  ``ranking`` orders the K*L*M product components: ``"variance"``
    (default) sorts by descending empirical score variance with lexicographic
    tie-break; ``"lexicographic"`` orders by (k, l, m) with m fastest.
    """
    mean, demeaned = center(tensor)
    cov_r = marginal_covariance(demeaned, "region")
    cov_w = marginal_covariance(demeaned, "omega")
    cov_s = marginal_covariance(demeaned, "s")
    basis_region = eigendecompose_marginal(
        cov_r, np.ones(tensor.n_regions), fve_target, dimension="region"
    )
    basis_omega = eigendecompose_marginal(
        cov_w, tensor.omega_grid.weights, fve_target, dimension="omega"
    )
    basis_s = eigendecompose_marginal(cov_s, tensor.s_grid.weights, fve_target, dimension="s")
    scores_klm = compute_scores(demeaned, basis_region, basis_omega, basis_s)
    variances = scores_klm.var(axis=0)
    order = _rank_triplets(variances, ranking)
    scores = np.column_stack([scores_klm[:, k - 1, l - 1, m - 1] for k, l, m in order])
    score_variance = np.array([variances[k - 1, l - 1, m - 1] for k, l, m in order])
    return HpcaModel(
        mean=mean,
        basis_region=basis_region,
        basis_omega=basis_omega,
        basis_s=basis_s,
        scores=scores,
        ranking=tuple(order),
        score_variance=score_variance,
        omega_grid=tensor.omega_grid,
        s_grid=tensor.s_grid,
        fve_target=fve_target,
        ranking_mode=ranking,
    )


def reconstruct(model: HpcaModel, q: int) -> HybridTensor:
    """Prefix reconstruction from the first ``q`` ranked components.

    Returns the demeaned signal estimate (the model mean is not added back;
    downstream regression carries its own intercept).  The output is dense on
    the full omega grid even when the model was fit on sparse data.
    """
    if not 1 <= q <= model.n_components:
        raise InvalidConfigError(f"q must be in [1, {model.n_components}], got {q}")
    ks = np.array([k - 1 for k, _, _ in model.ranking[:q]])
    ls = np.array([l - 1 for _, l, _ in model.ranking[:q]])
    ms = np.array([m - 1 for _, _, m in model.ranking[:q]])
    values = np.einsum(
        "it,rt,wt,st->irws",
        model.scores[:, :q],
        model.basis_region.vectors[:, ks],
        model.basis_omega.vectors[:, ls],
        model.basis_s.vectors[:, ms],
        optimize=True,
    )
    return HybridTensor(values=values, omega_grid=model.omega_grid, s_grid=model.s_grid)


# ---------------------------------------------------------------------------
# Serialization: a directory of CSV matrices plus a JSON manifest.
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def save_hpca_model(model: HpcaModel, directory, subjects=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n, n_regions = model.n_subjects, model.mean.shape[0]
    if subjects is None:
        subjects = [str(i + 1) for i in range(n)]
    if len(subjects) != n:
        raise ShapeMismatchError(f"{len(subjects)} subject ids for {n} score rows")
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": "hpca_model",
        "n_subjects": n,
        "n_regions": n_regions,
        "n_omega": model.omega_grid.size,
        "n_s": model.s_grid.size,
        "K": model.K,
        "L": model.L,
        "M": model.M,
        "fve_target": model.fve_target,
        "ranking_mode": model.ranking_mode,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    _write_rows(
        directory / "mean.csv",
        ["region", "omega", "s", "value"],
        (
            [r + 1, FLOAT_FMT % model.omega_grid.points[a], FLOAT_FMT % model.s_grid.points[b],
             FLOAT_FMT % model.mean[r, a, b]]
            for r in range(n_regions)
            for a in range(model.omega_grid.size)
            for b in range(model.s_grid.size)
        ),
    )
    _write_rows(
        directory / "basis_region.csv",
        ["region", "component", "value"],
        (
            [r + 1, j + 1, FLOAT_FMT % model.basis_region.vectors[r, j]]
            for r in range(n_regions)
            for j in range(model.K)
        ),
    )
    for name, basis, grid in (
        ("basis_omega.csv", model.basis_omega, model.omega_grid),
        ("basis_s.csv", model.basis_s, model.s_grid),
    ):
        col = name.split("_")[1].split(".")[0]
        _write_rows(
            directory / name,
            [col, "component", "value"],
            (
                [FLOAT_FMT % grid.points[i], j + 1, FLOAT_FMT % basis.vectors[i, j]]
                for i in range(grid.size)
                for j in range(basis.n_components)
            ),
        )
    _write_rows(
        directory / "eigenvalues.csv",
        ["dimension", "component", "eigenvalue", "cumulative_fve"],
        (
            [basis.dimension, j + 1, FLOAT_FMT % basis.eigenvalues[j], FLOAT_FMT % basis.fve[j]]
            for basis in (model.basis_region, model.basis_omega, model.basis_s)
            for j in range(basis.eigenvalues.size)
        ),
    )
    _write_rows(
        directory / "scores.csv",
        ["subject", "rank", "score"],
        (
            [subjects[i], t + 1, FLOAT_FMT % model.scores[i, t]]
            for i in range(n)
            for t in range(model.n_components)
        ),
    )
    _write_rows(
        directory / "ranking.csv",
        ["rank", "k", "l", "m", "score_variance"],
        (
            [t + 1, k, l, m, FLOAT_FMT % model.score_variance[t]]
            for t, (k, l, m) in enumerate(model.ranking)
        ),
    )


def _read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def load_hpca_model(directory) -> tuple[HpcaModel, list[str]]:
    """Read a saved model directory; returns the model and its subject ids."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("kind") != "hpca_model":
        raise InvalidDataError(f"{directory}: manifest does not describe an hpca model")
    n_regions, n_omega, n_s = manifest["n_regions"], manifest["n_omega"], manifest["n_s"]
    K, L, M = manifest["K"], manifest["L"], manifest["M"]

    mean_rows = _read_rows(directory / "mean.csv")
    omega_points = np.array(sorted({float(r["omega"]) for r in mean_rows}))
    s_points = np.array(sorted({float(r["s"]) for r in mean_rows}))
    omega_grid = make_trapezoid_grid(omega_points)
    s_grid = make_trapezoid_grid(s_points)
    w_idx = {v: i for i, v in enumerate(omega_points)}
    s_idx = {v: i for i, v in enumerate(s_points)}
    mean = np.zeros((n_regions, n_omega, n_s))
    for row in mean_rows:
        mean[int(row["region"]) - 1, w_idx[float(row["omega"])], s_idx[float(row["s"])]] = float(
            row["value"]
        )

    eig: dict[str, list[tuple[float, float]]] = {d: [] for d in DIMENSIONS}
    for row in _read_rows(directory / "eigenvalues.csv"):
        eig[row["dimension"]].append((float(row["eigenvalue"]), float(row["cumulative_fve"])))

    def build_basis(dimension, size, n_comp, weight, rows, index_of):
        vectors = np.zeros((size, n_comp))
        for row in rows:
            vectors[index_of(row), int(row["component"]) - 1] = float(row["value"])
        pairs = eig[dimension]
        return MarginalBasis(
            dimension=dimension,
            vectors=vectors,
            eigenvalues=np.array([p[0] for p in pairs]),
            fve=np.array([p[1] for p in pairs]),
            inner_weights=weight,
        )

    basis_region = build_basis(
        "region", n_regions, K, np.ones(n_regions),
        _read_rows(directory / "basis_region.csv"), lambda r: int(r["region"]) - 1,
    )
    basis_omega = build_basis(
        "omega", n_omega, L, omega_grid.weights,
        _read_rows(directory / "basis_omega.csv"), lambda r: w_idx[float(r["omega"])],
    )
    basis_s = build_basis(
        "s", n_s, M, s_grid.weights,
        _read_rows(directory / "basis_s.csv"), lambda r: s_idx[float(r["s"])],
    )

    n = manifest["n_subjects"]
    score_rows = _read_rows(directory / "scores.csv")
    # subject row order in the file is the model's subject order
    subjects = list(dict.fromkeys(row["subject"] for row in score_rows))
    if len(subjects) != n:
        raise InvalidDataError(f"scores.csv lists {len(subjects)} subjects, expected {n}")
    subject_index = {sid: i for i, sid in enumerate(subjects)}
    scores = np.zeros((n, K * L * M))
    for row in score_rows:
        scores[subject_index[row["subject"]], int(row["rank"]) - 1] = float(row["score"])
    ranking_rows = sorted(_read_rows(directory / "ranking.csv"), key=lambda r: int(r["rank"]))
    ranking = tuple((int(r["k"]), int(r["l"]), int(r["m"])) for r in ranking_rows)
    score_variance = np.array([float(r["score_variance"]) for r in ranking_rows])
    model = HpcaModel(
        mean=mean,
        basis_region=basis_region,
        basis_omega=basis_omega,
        basis_s=basis_s,
        scores=scores,
        ranking=ranking,
        score_variance=score_variance,
        omega_grid=omega_grid,
        s_grid=s_grid,
        fve_target=manifest["fve_target"],
        ranking_mode=manifest["ranking_mode"],
    )
    return model, subjects
