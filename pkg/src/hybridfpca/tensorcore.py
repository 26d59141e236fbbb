"""Grids, quadrature, and the hybrid tensor container shared by all other modules.

A hybrid tensor holds observations ``Y[i, r, w, s]`` for subject ``i``,
scalar region index ``r``, and two functional dimensions sampled on shared
grids.  Integrals over the functional dimensions are trapezoid-rule
quadratures; regions are summed plainly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientSubjectsError,
    InvalidDataError,
    InvalidGridError,
    ShapeMismatchError,
)

__all__ = [
    "Grid1D",
    "HybridTensor",
    "FunctionalSample",
    "make_trapezoid_grid",
    "trapezoid_weights",
    "weighted_inner_product",
    "center",
    "read_hybrid_csv",
    "write_hybrid_csv",
    "read_functional_csv",
    "write_functional_csv",
]

# Round-trip exact float formatting for all CSV output.
FLOAT_FMT = "%.17g"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid1D:
    """Ordered sampling points of one functional domain with quadrature weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(self.points))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.points.ndim != 1 or self.points.size < 2:
            raise InvalidGridError("grid needs at least two one-dimensional points")
        if np.any(np.diff(self.points) <= 0):
            raise InvalidGridError("grid points must be strictly increasing")
        if self.weights.shape != self.points.shape:
            raise ShapeMismatchError("weights must align with points")
        if np.any(self.weights <= 0):
            raise InvalidGridError("quadrature weights must be strictly positive")
        span = self.points[-1] - self.points[0]
        if abs(self.weights.sum() - span) > 1e-12 * max(span, 1.0):
            raise InvalidGridError("quadrature weights must sum to the grid span")

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Trapezoid-rule weights for ordered points: half gaps at the ends, averaged gaps inside."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size < 2:
        raise InvalidGridError("need at least two points for trapezoid weights")
    if np.any(np.diff(points) <= 0):
        raise InvalidGridError("points must be strictly increasing")
    w = np.empty_like(points)
    w[0] = (points[1] - points[0]) / 2.0
    w[-1] = (points[-1] - points[-2]) / 2.0
    if points.size > 2:
        w[1:-1] = (points[2:] - points[:-2]) / 2.0
    return w


def make_trapezoid_grid(points) -> Grid1D:
    """Build a :class:`Grid1D` carrying trapezoid-rule quadrature weights."""
    points = np.asarray(points, dtype=float)
    return Grid1D(points=points, weights=trapezoid_weights(points))


def weighted_inner_product(f, g, grid: Grid1D) -> float:
    """Quadrature inner product ``sum_j f_j g_j w_j`` on one grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (grid.size,) or g.shape != (grid.size,):
        raise ShapeMismatchError(
            f"curves of length {f.shape}/{g.shape} do not conform to grid of size {grid.size}"
        )
    return float(np.sum(f * g * grid.weights))


@dataclass(frozen=True)
class HybridTensor:
    """Observations ``values[i, r, w, s]`` on shared omega and s grids.

    ``observed_mask[i, w]``, when present, marks which longitudinal slices of
    subject ``i`` were observed; values at unobserved slices are stored as 0
    and carry no information.
    """

    values: np.ndarray
    omega_grid: Grid1D
    s_grid: Grid1D
    observed_mask: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if self.values.ndim != 4:
            raise ShapeMismatchError("hybrid tensor values must be 4-d (subject, region, omega, s)")
        n, r, n_omega, n_s = self.values.shape
        if n < 1 or r < 1:
            raise ShapeMismatchError("need at least one subject and one region")
        if n_omega != self.omega_grid.size or n_s != self.s_grid.size:
            raise ShapeMismatchError(
                f"values extent {(n_omega, n_s)} does not match grids "
                f"{(self.omega_grid.size, self.s_grid.size)}"
            )
        if self.observed_mask is not None:
            mask = np.asarray(self.observed_mask, dtype=bool)
            mask.setflags(write=False)
            object.__setattr__(self, "observed_mask", mask)
            if mask.shape != (n, n_omega):
                raise ShapeMismatchError("observed_mask must have shape (subjects, omega points)")
            if np.any(mask.sum(axis=1) < 2):
                raise InvalidDataError("every subject needs at least two observed omega slices")
            observed = np.where(mask[:, None, :, None], self.values, 0.0)
            if not np.all(np.isfinite(observed)):
                raise InvalidDataError("non-finite value at an observed position")
            # normalize storage: unobserved slices hold exactly 0
            object.__setattr__(self, "values", _readonly(observed))
        else:
            if not np.all(np.isfinite(self.values)):
                raise InvalidDataError("non-finite value in hybrid tensor")

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_regions(self) -> int:
        return self.values.shape[1]

    def subject_omega_weights(self) -> np.ndarray:
        """Per-subject quadrature weights over omega, shape (subjects, omega points).

        Complete data repeats the grid weights.  With a sparsity mask, each
        row holds trapezoid weights built on that subject's observed points
        only, zero elsewhere, so masked sums integrate over the observed
        sub-domain.
        """
        n, _, n_omega, _ = self.values.shape
        if self.observed_mask is None:
            return np.tile(self.omega_grid.weights, (n, 1))
        out = np.zeros((n, n_omega))
        pts = self.omega_grid.points
        for i in range(n):
            idx = np.flatnonzero(self.observed_mask[i])
            out[i, idx] = trapezoid_weights(pts[idx])
        return out


@dataclass(frozen=True)
class FunctionalSample:
    """A set of one-dimensional curves sampled on a common grid."""

    curves: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        object.__setattr__(self, "curves", _readonly(self.curves))
        if self.curves.ndim != 2:
            raise ShapeMismatchError("curves must be 2-d (subject, grid point)")
        if self.curves.shape[1] != self.grid.size:
            raise ShapeMismatchError(
                f"curve length {self.curves.shape[1]} does not match grid size {self.grid.size}"
            )
        if not np.all(np.isfinite(self.curves)):
            raise InvalidDataError("non-finite value in functional sample")

    @property
    def n_subjects(self) -> int:
        return self.curves.shape[0]


def center(tensor: HybridTensor) -> tuple[np.ndarray, HybridTensor]:
    """Pointwise across-subject mean and the demeaned tensor.

    The mean at each (region, omega, s) averages the subjects observing that
    omega slice.  Demeaned values at unobserved slices are zeroed.
    """
    if tensor.n_subjects < 2:
        raise InsufficientSubjectsError("centering needs at least two subjects")
    y = tensor.values
    if tensor.observed_mask is None:
        mean = y.mean(axis=0)
        demeaned = y - mean
    else:
        m = tensor.observed_mask.astype(float)[:, None, :, None]
        counts = m.sum(axis=0)
        # omega slices observed by nobody get mean 0 by convention
        mean = np.divide((y * m).sum(axis=0), counts, out=np.zeros(y.shape[1:]), where=counts > 0)
        demeaned = (y - mean) * m
    return mean, HybridTensor(
        values=demeaned,
        omega_grid=tensor.omega_grid,
        s_grid=tensor.s_grid,
        observed_mask=tensor.observed_mask,
    )


# ---------------------------------------------------------------------------
# CSV interchange
#
# Hybrid tensor: long form with header subject,region,omega,s,value.  Grids
# are inferred from the distinct sorted omega and s values; a (subject, omega)
# pair absent for all regions and s marks an unobserved longitudinal slice.
# Functional sample: header subject,s,value.
# ---------------------------------------------------------------------------


def _sort_subjects(ids):
    try:
        return sorted(ids, key=lambda t: (0, int(t)))
    except ValueError:
        return sorted(ids)


def write_hybrid_csv(path, tensor: HybridTensor, subjects=None) -> None:
    n, n_regions, n_omega, n_s = tensor.values.shape
    if subjects is None:
        subjects = [str(i + 1) for i in range(n)]
    if len(subjects) != n:
        raise ShapeMismatchError("subject id list must match tensor extent")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "region", "omega", "s", "value"])
        for i in range(n):
            mask_row = None if tensor.observed_mask is None else tensor.observed_mask[i]
            for r in range(n_regions):
                for a in range(n_omega):
                    if mask_row is not None and not mask_row[a]:
                        continue
                    for b in range(n_s):
                        w.writerow(
                            [
                                subjects[i],
                                r + 1,
                                FLOAT_FMT % tensor.omega_grid.points[a],
                                FLOAT_FMT % tensor.s_grid.points[b],
                                FLOAT_FMT % tensor.values[i, r, a, b],
                            ]
                        )


def read_hybrid_csv(path) -> tuple[HybridTensor, list[str]]:
    """Parse a long-form hybrid tensor CSV; returns the tensor and subject ids in row order."""
    path = Path(path)
    cells: dict[tuple[str, int, float, float], float] = {}
    subjects: list[str] = []
    regions: set[int] = set()
    omegas: set[float] = set()
    ss: set[float] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["subject", "region", "omega", "s", "value"]:
            raise InvalidDataError(f"{path}: expected header subject,region,omega,s,value")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise InvalidDataError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                subj = row[0].strip()
                region = int(row[1])
                omega = float(row[2])
                s = float(row[3])
                value = float(row[4])
            except ValueError as exc:
                raise InvalidDataError(f"{path}:{lineno}: {exc}") from None
            key = (subj, region, omega, s)
            if key in cells:
                raise InvalidDataError(f"{path}:{lineno}: duplicate cell {key}")
            cells[key] = value
            if subj not in subjects:
                subjects.append(subj)
            regions.add(region)
            omegas.add(omega)
            ss.add(s)
    if not cells:
        raise InvalidDataError(f"{path}: no data rows")
    subjects = _sort_subjects(subjects)
    n_regions = max(regions)
    if regions != set(range(1, n_regions + 1)):
        raise InvalidDataError(f"{path}: regions must be contiguous 1..R, got {sorted(regions)}")
    omega_points = np.array(sorted(omegas))
    s_points = np.array(sorted(ss))
    omega_grid = make_trapezoid_grid(omega_points)
    s_grid = make_trapezoid_grid(s_points)
    omega_index = {v: j for j, v in enumerate(omega_points)}
    s_index = {v: j for j, v in enumerate(s_points)}
    n = len(subjects)
    values = np.zeros((n, n_regions, omega_points.size, s_points.size))
    seen = np.zeros((n, n_regions, omega_points.size, s_points.size), dtype=bool)
    subj_index = {sid: i for i, sid in enumerate(subjects)}
    for (subj, region, omega, s), value in cells.items():
        values[subj_index[subj], region - 1, omega_index[omega], s_index[s]] = value
        seen[subj_index[subj], region - 1, omega_index[omega], s_index[s]] = True
    slice_counts = seen.sum(axis=(1, 3))
    full = n_regions * s_points.size
    mask = slice_counts == full
    partial = (slice_counts > 0) & ~mask
    if np.any(partial):
        i, a = np.argwhere(partial)[0]
        raise InvalidDataError(
            f"{path}: subject {subjects[i]} has a partial slice at omega={omega_points[a]:g}; "
            "a (subject, omega) slice must be absent entirely or complete"
        )
    tensor = HybridTensor(
        values=values,
        omega_grid=omega_grid,
        s_grid=s_grid,
        observed_mask=None if mask.all() else mask,
    )
    return tensor, subjects


def write_functional_csv(path, sample: FunctionalSample, subjects=None) -> None:
    n, n_s = sample.curves.shape
    if subjects is None:
        subjects = [str(i + 1) for i in range(n)]
    if len(subjects) != n:
        raise ShapeMismatchError("subject id list must match curve count")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject", "s", "value"])
        for i in range(n):
            for b in range(n_s):
                w.writerow(
                    [subjects[i], FLOAT_FMT % sample.grid.points[b], FLOAT_FMT % sample.curves[i, b]]
                )


def read_functional_csv(path) -> tuple[FunctionalSample, list[str]]:
    path = Path(path)
    cells: dict[tuple[str, float], float] = {}
    subjects: list[str] = []
    ss: set[float] = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["subject", "s", "value"]:
            raise InvalidDataError(f"{path}: expected header subject,s,value")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise InvalidDataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                subj, s, value = row[0].strip(), float(row[1]), float(row[2])
            except ValueError as exc:
                raise InvalidDataError(f"{path}:{lineno}: {exc}") from None
            if (subj, s) in cells:
                raise InvalidDataError(f"{path}:{lineno}: duplicate cell ({subj}, {s:g})")
            cells[(subj, s)] = value
            if subj not in subjects:
                subjects.append(subj)
            ss.add(s)
    if not cells:
        raise InvalidDataError(f"{path}: no data rows")
    subjects = _sort_subjects(subjects)
    s_points = np.array(sorted(ss))
    grid = make_trapezoid_grid(s_points)
    curves = np.full((len(subjects), s_points.size), np.nan)
    s_index = {v: j for j, v in enumerate(s_points)}
    subj_index = {sid: i for i, sid in enumerate(subjects)}
    for (subj, s), value in cells.items():
        curves[subj_index[subj], s_index[s]] = value
    if np.any(np.isnan(curves)):
        raise InvalidDataError(f"{path}: every subject must cover the full s grid")
    return FunctionalSample(curves=curves, grid=grid), subjects
