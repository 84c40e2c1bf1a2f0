"""Convolutive nonnegative matrix factorization under separability.

A library and CLI built around the locate-estimate-cluster-sort pipeline
for recovering convolutive factor models whose template columns appear,
positively scaled, among the data columns. Ships the separable locators,
a block-pivot nonnegative least squares solver, multiplicative-update and
alternating-NNLS baselines, and a reproducible synthetic benchmark.
"""

from .core import (
    BlockFactorization,
    CnmfModel,
    block_stack,
    col_norm_extremes,
    normalize_columns,
    reconstruct,
    rel_mse,
    shift_left,
    shift_left_vec,
    shift_right,
    shift_right_vec,
)
from .nnls import (
    NnlsConvergenceError,
    NnlsError,
    NnlsOptions,
    NnlsRankError,
    nnls_solve,
    nnls_solve_gram,
)
from .similarity import ShiftSimilarity, cos_shift, perm_score, shift_leq
from .locate import (
    LocateError,
    LocateResult,
    orcon_spa,
    precond_spa,
    spa,
    threshold_candidates,
)
from .lecs import (
    Clustering,
    LagOrder,
    LecsConfig,
    assemble_factors,
    lecs_fit,
    shift_cluster,
    shift_sort,
    spectral_cluster,
)
from .baselines import IterOptions, anls_fit, init_random_scaled, mult_fit
from .synth import (
    GenerationError,
    GroundTruth,
    NoiseSpec,
    SynthConfig,
    add_noise,
    gen_separable,
    noise_grid,
)
from .report import FitReport

__version__ = "0.1.0"

__all__ = [
    "BlockFactorization",
    "CnmfModel",
    "Clustering",
    "FitReport",
    "GenerationError",
    "GroundTruth",
    "IterOptions",
    "LagOrder",
    "LecsConfig",
    "LocateError",
    "LocateResult",
    "NnlsConvergenceError",
    "NnlsError",
    "NnlsOptions",
    "NnlsRankError",
    "NoiseSpec",
    "ShiftSimilarity",
    "SynthConfig",
    "add_noise",
    "anls_fit",
    "assemble_factors",
    "block_stack",
    "col_norm_extremes",
    "cos_shift",
    "gen_separable",
    "init_random_scaled",
    "lecs_fit",
    "mult_fit",
    "nnls_solve",
    "nnls_solve_gram",
    "noise_grid",
    "normalize_columns",
    "orcon_spa",
    "perm_score",
    "precond_spa",
    "reconstruct",
    "rel_mse",
    "shift_cluster",
    "shift_leq",
    "shift_left",
    "shift_left_vec",
    "shift_right",
    "shift_right_vec",
    "shift_sort",
    "spa",
    "spectral_cluster",
    "threshold_candidates",
]
