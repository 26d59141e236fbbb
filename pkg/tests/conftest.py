"""Shared fixtures: random tensor factories and paths to the shipped data."""

from pathlib import Path

import numpy as np
import pytest

from hybridfpca import HybridTensor, make_trapezoid_grid

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def build_tensor(rng, n, n_regions, n_omega, n_s, masked=False, scale=1.0):
    """Random dense tensor on unit grids; optionally with a sparsity mask."""
    omega_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, n_omega))
    s_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, n_s))
    values = scale * rng.normal(size=(n, n_regions, n_omega, n_s))
    mask = None
    if masked:
        mask = np.zeros((n, n_omega), dtype=bool)
        for i in range(n):
            keep = rng.choice(n_omega, size=max(2, n_omega // 2), replace=False)
            mask[i, np.sort(keep)] = True
        values = np.where(mask[:, None, :, None], values, 0.0)
    return HybridTensor(values=values, omega_grid=omega_grid, s_grid=s_grid, observed_mask=mask)


def separable_tensor(rng, n=6, n_regions=3, n_omega=7, n_s=9):
    """Noiseless rank-(1,1,1) data: one component plus a subject mean of zero."""
    omega_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, n_omega))
    s_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, n_s))
    v = rng.normal(size=n_regions)
    v /= np.linalg.norm(v)
    phi = np.cos(np.pi * omega_grid.points) + 1.2
    phi /= np.sqrt(np.sum(phi**2 * omega_grid.weights))
    psi = np.sin(np.pi * s_grid.points) + 0.8
    psi /= np.sqrt(np.sum(psi**2 * s_grid.weights))
    xi = rng.normal(scale=2.0, size=n)
    xi -= xi.mean()  # zero-mean scores keep the subject mean at exactly zero signal
    values = np.einsum("i,r,w,s->irws", xi, v, phi, psi)
    tensor = HybridTensor(values=values, omega_grid=omega_grid, s_grid=s_grid)
    return tensor, xi, v, phi, psi


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def fixture_paths():
    paths = {
        "tensor": FIXTURE_DIR / "selection_tensor.csv",
        "predictors": [
            FIXTURE_DIR / "selection_predictor_1.csv",
            FIXTURE_DIR / "selection_predictor_2.csv",
        ],
    }
    for p in [paths["tensor"], *paths["predictors"]]:
        if not p.exists():
            pytest.skip(f"shipped fixture missing: {p}")
    return paths
