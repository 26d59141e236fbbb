"""Regenerate the committed component-selection fixture.

Builds a small region-referenced tensor whose top-variance component is the
only one tied to the predictor curves, and whose remaining components either
survive regional pooling as unpredictable clutter or vanish under it.  With
that structure, scanning component counts by test error lands on q = 1: the
raw data adds noise on top, and every component after the first adds pooled
variance no predictor explains.

Run from the repository root:

    python3 scripts/make_selection_fixture.py
"""

from pathlib import Path

import numpy as np

from hybridfpca.simgen import cosine_basis
from hybridfpca.tensorcore import (
    FunctionalSample,
    HybridTensor,
    make_trapezoid_grid,
    write_functional_csv,
    write_hybrid_csv,
)

N = 30
R = 4
N_OMEGA = 10
N_S = 12
N_G = 12
SEED = 20240817


def main() -> None:
    rng = np.random.default_rng(SEED)
    omega_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, N_OMEGA))
    s_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, N_S))
    g_grid = make_trapezoid_grid(np.linspace(0.0, 1.0, N_G))

    # region patterns: the first pools to 1/2 per region, the second cancels
    v1 = np.full(R, 0.5)
    v2 = np.array([0.5, -0.5, 0.5, -0.5])
    phi = cosine_basis(omega_grid.points, 2)
    psi = cosine_basis(s_grid.points, 3)

    # two predictor curves; their leading coefficients drive the top score
    chi_coef = rng.normal(size=(N, 2, 2)) * np.array([1.0, 0.3])
    chi_basis = cosine_basis(g_grid.points, 2)
    chi = np.einsum("iju,gu->ijg", chi_coef, chi_basis)

    score_top = 2.0 * chi_coef[:, 0, 0] + 1.2 * chi_coef[:, 1, 0] + rng.normal(0.0, 0.2, N)
    components = [
        (score_top, v1, phi[:, 0], psi[:, 0]),  # predictable, pools through
        (rng.normal(0.0, 1.5, N), v1, phi[:, 0], psi[:, 1]),  # clutter, pools through
        (rng.normal(0.0, 1.3, N), v1, phi[:, 1], psi[:, 0]),  # clutter, pooled away
        (rng.normal(0.0, 1.2, N), v2, phi[:, 0], psi[:, 0]),  # clutter, pooled away
        (rng.normal(0.0, 0.9, N), v1, phi[:, 0], psi[:, 2]),  # clutter, pools through
    ]
    values = np.zeros((N, R, N_OMEGA, N_S))
    for xi, v, f, g in components:
        values += np.einsum("i,r,w,s->irws", xi, v, f, g)
    values += rng.normal(0.0, 0.15, size=values.shape)

    tensor = HybridTensor(values=values, omega_grid=omega_grid, s_grid=s_grid)
    out = Path(__file__).resolve().parent.parent / "fixtures"
    out.mkdir(exist_ok=True)
    write_hybrid_csv(out / "selection_tensor.csv", tensor)
    for j in range(2):
        sample = FunctionalSample(curves=chi[:, j, :], grid=g_grid)
        write_functional_csv(out / f"selection_predictor_{j + 1}.csv", sample)
    print(f"wrote fixture CSVs to {out}")


if __name__ == "__main__":
    main()
