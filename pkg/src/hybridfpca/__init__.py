"""Region-referenced functional data: decomposition, pooling, regression.

The pipeline: decompose subject x region x omega x s tensors into marginal
eigencomponents with subject scores (:mod:`hybridfpca.hpca`), collapse
reconstructions to one curve per subject (:mod:`hybridfpca.pooling`), regress
response curves on predictor curves (:mod:`hybridfpca.fofreg`), and choose
how many components to keep by out-of-sample prediction error
(:mod:`hybridfpca.selection`).  :mod:`hybridfpca.simgen` provides seeded
generators and replicate studies; the ``hybridfpca`` command drives it all
from files.
"""

from .errors import (
    HybridFpcaError,
    IllPosedFitError,
    InsufficientSubjectsError,
    InvalidConfigError,
    InvalidDataError,
    InvalidGridError,
    NumericalFailureError,
    ShapeMismatchError,
    UndefinedCorrelationError,
)
from .fofreg import (
    FofConfig,
    FofModel,
    coefficient_surface,
    fit_fof,
    load_fof_model,
    predict,
    save_fof_model,
    train_test_split_indices,
)
from .hpca import (
    HpcaModel,
    MarginalBasis,
    compute_scores,
    eigendecompose_marginal,
    fit_hpca,
    load_hpca_model,
    marginal_covariance,
    reconstruct,
    save_hpca_model,
)
from .metrics import (
    mse_beta,
    percentile_summary,
    prediction_correlation,
    prediction_mspe,
    timed,
)
from .pooling import pool_reconstruction, pool_to_curve, pooled_component_curves
from .selection import SelectionResult, mspe, select_num_components
from .simgen import (
    FofGenConfig,
    HybridGenConfig,
    ScenarioSettings,
    gen_fof,
    gen_hybrid,
    run_scenario1,
    run_scenario2,
)
from .tensorcore import (
    FunctionalSample,
    Grid1D,
    HybridTensor,
    center,
    make_trapezoid_grid,
    read_functional_csv,
    read_hybrid_csv,
    trapezoid_weights,
    weighted_inner_product,
    write_functional_csv,
    write_hybrid_csv,
)

__version__ = "0.1.0"

__all__ = [
    "HybridFpcaError",
    "InvalidGridError",
    "ShapeMismatchError",
    "InvalidDataError",
    "InvalidConfigError",
    "InsufficientSubjectsError",
    "IllPosedFitError",
    "NumericalFailureError",
    "UndefinedCorrelationError",
    "Grid1D",
    "HybridTensor",
    "FunctionalSample",
    "trapezoid_weights",
    "make_trapezoid_grid",
    "weighted_inner_product",
    "center",
    "read_hybrid_csv",
    "write_hybrid_csv",
    "read_functional_csv",
    "write_functional_csv",
    "MarginalBasis",
    "HpcaModel",
    "marginal_covariance",
    "eigendecompose_marginal",
    "compute_scores",
    "fit_hpca",
    "reconstruct",
    "save_hpca_model",
    "load_hpca_model",
    "pool_to_curve",
    "pooled_component_curves",
    "pool_reconstruction",
    "FofConfig",
    "FofModel",
    "fit_fof",
    "predict",
    "coefficient_surface",
    "train_test_split_indices",
    "save_fof_model",
    "load_fof_model",
    "SelectionResult",
    "mspe",
    "select_num_components",
    "mse_beta",
    "prediction_mspe",
    "prediction_correlation",
    "percentile_summary",
    "timed",
    "HybridGenConfig",
    "FofGenConfig",
    "ScenarioSettings",
    "gen_hybrid",
    "gen_fof",
    "run_scenario1",
    "run_scenario2",
    "__version__",
]
