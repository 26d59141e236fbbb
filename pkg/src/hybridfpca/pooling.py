"""Collapse a hybrid tensor to one curve per subject on the s domain.

The pooling map averages regions and integrates out omega:

    W_i(s) = (1/R) sum_r \\int Y_i(r, w, s) dw

The omega integral is taken literally (no division by the domain length); on
the unit domains used throughout, the two conventions coincide.
"""

from __future__ import annotations

import numpy as np

from .hpca import HpcaModel
from .tensorcore import FunctionalSample, HybridTensor

__all__ = ["pool_to_curve", "pool_reconstruction", "pooled_component_curves"]


def pool_to_curve(tensor: HybridTensor) -> FunctionalSample:
    """Region-average, omega-integrated curves on the tensor's s grid.

    Reconstructions are dense and integrate over the full omega grid; a raw
    tensor with a sparsity mask integrates each subject over its observed
    omega points only.
    """
    u = tensor.subject_omega_weights()
    curves = np.einsum("irws,iw->is", tensor.values, u, optimize=True) / tensor.n_regions
    return FunctionalSample(curves=curves, grid=tensor.s_grid)


def pooled_component_curves(model: HpcaModel) -> np.ndarray:
    """Pooled image of each ranked component, shape (component, s).

    Component t pools to ``mean_r(V_kt) * \\int phi_lt dw * psi_mt(s)``, so a
    prefix reconstruction pools to the score-weighted sum of these curves.
    """
    region_mean = model.basis_region.vectors.mean(axis=0)
    omega_integral = model.omega_grid.weights @ model.basis_omega.vectors
    out = np.empty((model.n_components, model.s_grid.size))
    for t, (k, l, m) in enumerate(model.ranking):
        out[t] = region_mean[k - 1] * omega_integral[l - 1] * model.basis_s.vectors[:, m - 1]
    return out


def pool_reconstruction(model: HpcaModel, q: int) -> FunctionalSample:
    """Fast path for ``pool_to_curve(reconstruct(model, q))`` via pooled components."""
    from .hpca import reconstruct  # for the q range check semantics

    if not 1 <= q <= model.n_components:
        reconstruct(model, q)  # raises the canonical error
    curves = model.scores[:, :q] @ pooled_component_curves(model)[:q]
    return FunctionalSample(curves=curves, grid=model.s_grid)
