"""Sampled low-rank approximation: leveraged-element sampling plus weighted
alternating minimization, with product, covariance, and distributed variants."""

__version__ = "0.1.0"

from .errors import DegenerateInputError, LelaError, ParameterError
from .linalg import (
    DenseMatrix,
    Factorization,
    LinearOperator,
    MatrixStats,
    OracleDecomposition,
    compute_stats,
    low_rank_diff_spectral_norm,
    qr_orthonormalize,
    solve_weighted_row_ls,
    spectral_error,
    topk_svd,
)
from .sampling import (
    ProductSamplingPlan,
    SampleSet,
    SamplingPlan,
    build_plan,
    build_product_plan,
    draw_bernoulli,
    draw_multinomial,
    materialize_product_samples,
    saturating_sample_count,
)
from .waltmin import (
    InitResult,
    WaltMinConfig,
    als_half_step,
    initialize,
    objective,
    split_samples,
    waltmin,
)
from .matprod import (
    ProductTask,
    lowrank_covariance,
    lowrank_product,
    stagewise_product_baseline,
)
from .distpca import (
    CommLedger,
    Message,
    ServerShard,
    centralized_reference,
    communication_bound,
    dist_init,
    dist_sample,
    dist_waltmin_round,
    partition_rows,
    run_distpca,
)
from .driver import LelaReport, evaluate, lela, suggest_sample_count
from .bench import (
    ExperimentConfig,
    ExperimentRow,
    add_noise,
    gaussian_projection_baseline,
    gen_powerlaw,
    make_adversarial_product,
    run_experiment,
)
from .mmio import load_factorization, read_matrix, save_factorization, write_matrix

__all__ = [
    "DegenerateInputError",
    "LelaError",
    "ParameterError",
    "DenseMatrix",
    "Factorization",
    "LinearOperator",
    "MatrixStats",
    "OracleDecomposition",
    "compute_stats",
    "low_rank_diff_spectral_norm",
    "qr_orthonormalize",
    "solve_weighted_row_ls",
    "spectral_error",
    "topk_svd",
    "ProductSamplingPlan",
    "SampleSet",
    "SamplingPlan",
    "build_plan",
    "build_product_plan",
    "draw_bernoulli",
    "draw_multinomial",
    "materialize_product_samples",
    "saturating_sample_count",
    "InitResult",
    "WaltMinConfig",
    "als_half_step",
    "initialize",
    "objective",
    "split_samples",
    "waltmin",
    "ProductTask",
    "lowrank_covariance",
    "lowrank_product",
    "stagewise_product_baseline",
    "CommLedger",
    "Message",
    "ServerShard",
    "centralized_reference",
    "communication_bound",
    "dist_init",
    "dist_sample",
    "dist_waltmin_round",
    "partition_rows",
    "run_distpca",
    "LelaReport",
    "evaluate",
    "lela",
    "suggest_sample_count",
    "ExperimentConfig",
    "ExperimentRow",
    "add_noise",
    "gaussian_projection_baseline",
    "gen_powerlaw",
    "make_adversarial_product",
    "run_experiment",
    "load_factorization",
    "read_matrix",
    "save_factorization",
    "write_matrix",
]
