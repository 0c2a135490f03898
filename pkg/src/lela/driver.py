"""Top-level pipeline: stats pass, sampling pass, alternating minimization.

The driver enforces the two-pass discipline over the input matrix (one pass
for statistics, one for drawing and filling the samples) and reports errors of
the computed factorization, optionally against the dense-SVD oracle when the
problem is small enough to afford one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import ParameterError
from .linalg import DenseMatrix, Factorization, compute_stats, spectral_error
from .sampling import build_plan, draw_bernoulli, draw_multinomial
from .waltmin import WaltMinConfig, waltmin

# Dense SVD oracle metrics are refused above this size; keeping the main path
# at input-sparsity cost is the whole point of the pipeline.
ORACLE_SIZE_GUARD = 2000


@dataclass(frozen=True)
class LelaReport:
    """Result bundle for one pipeline run."""

    factorization: Factorization
    spectral_err: float
    fro_err: float
    oracle_spectral: float | None
    oracle_fro: float | None
    sample_count: int
    passes_over_M: int


def streaming_fro_error(M: DenseMatrix, F: Factorization, block: int = 4096) -> float:
    """Frobenius error |M - u v^T|_F accumulated over column blocks.

    The factored matrix is only ever materialized one block at a time, which
    keeps accuracy when the error is tiny (no cancellation of large norms).
    """
    if F.shape != M.shape:
        raise ParameterError("factorization shape does not match the matrix")
    a = M.data
    total = 0.0
    for start in range(0, M.n_cols, block):
        stop = min(start + block, M.n_cols)
        diff = a[:, start:stop] - F.u @ F.v[start:stop].T
        total += float(np.einsum("ij,ij->", diff, diff))
    return math.sqrt(total)


def oracle_gaps(M: DenseMatrix, r: int) -> tuple[float, float]:
    """Exact (spectral, Frobenius) distances from M to its best rank-r part.

    Costs a dense SVD and is therefore refused above the size guard.
    """
    if min(M.shape) > ORACLE_SIZE_GUARD:
        raise ParameterError(
            f"oracle metrics refused: min(n, d) > {ORACLE_SIZE_GUARD} makes the dense SVD too costly"
        )
    sigma = np.linalg.svd(M.data, compute_uv=False)
    tail = sigma[r:]
    spectral = float(tail[0]) if tail.size else 0.0
    fro = float(np.sqrt(np.sum(tail * tail)))
    return spectral, fro


@dataclass(frozen=True)
class ErrorBundle:
    spectral_err: float
    fro_err: float
    oracle_spectral: float | None
    oracle_fro: float | None


def evaluate(
    M: DenseMatrix,
    F: Factorization,
    r: int,
    seed: int = 0,
    want_oracle: bool = True,
    power_iters: int = 200,
) -> ErrorBundle:
    """Spectral and Frobenius errors of F against M, plus oracle gaps on request."""
    sp = spectral_error(M, F, iters=power_iters, seed=seed)
    fro = streaming_fro_error(M, F)
    osp = ofro = None
    if want_oracle:
        osp, ofro = oracle_gaps(M, r)
    return ErrorBundle(sp, fro, osp, ofro)


def suggest_sample_count(
    n: int, r: int, epsilon: float, c: float = 1.0, kappa: float = 1.0
) -> int:
    """Budget heuristic ceil(c * kappa^2 * n * r^3 * ln(n) / epsilon^2).

    The theory's constants are not computable a priori, so c and the condition
    number estimate are caller-supplied.
    """
    if n < 2 or r < 1 or epsilon <= 0 or c <= 0 or kappa < 1:
        raise ParameterError("invalid arguments for the sample-count heuristic")
    return int(math.ceil(c * kappa * kappa * n * r**3 * math.log(n) / (epsilon * epsilon)))


def lela(
    M: DenseMatrix,
    r: int,
    m: int,
    iterations: int,
    mode: str = "multinomial",
    split: str = "reuse",
    seed: int = 0,
    want_oracle: bool = False,
    cross_validate: bool = False,
    init_svd_iters: int = 100,
    ls_eig_floor: float = 0.07,
) -> LelaReport:
    """Run the full sampled low-rank approximation pipeline on M.

    ``mode`` selects the fast multinomial sampler (default) or the exact
    Bernoulli reference; ``split`` picks sample reuse (default) or fresh
    disjoint subsets per half step.  Oracle metrics are only computed when
    requested since they cost a dense SVD.
    """
    if r < 1 or r > min(M.shape):
        raise ParameterError("rank must lie in [1, min(n, d)]")
    if iterations < 1:
        raise ParameterError("iteration count must be at least 1")
    if mode not in ("multinomial", "bernoulli"):
        raise ParameterError("mode must be 'multinomial' or 'bernoulli'")
    passes_before = M.pass_count
    plan = build_plan(M, m)  # pass 1 (statistics)
    if mode == "bernoulli":
        samples = draw_bernoulli(plan, M, seed=rng.derive_seed(seed, rng.TAG_BERNOULLI))
    else:
        samples = draw_multinomial(plan, M, seed=rng.derive_seed(seed, rng.TAG_ROW_DRAWS))
    # pass 2 happened inside the draw (probabilities plus value fill)
    cfg = WaltMinConfig(
        rank=r,
        iterations=iterations,
        split_mode=split,
        seed=rng.derive_seed(seed, rng.TAG_SPLIT),
        cross_validate=cross_validate,
        init_svd_iters=init_svd_iters,
        ls_eig_floor=ls_eig_floor,
    )
    F = waltmin(samples, plan.stats, cfg)
    passes = M.pass_count - passes_before
    sp = spectral_error(M, F, iters=200, seed=rng.derive_seed(seed, rng.TAG_SPECTRAL))
    fro = streaming_fro_error(M, F)
    osp = ofro = None
    if want_oracle:
        osp, ofro = oracle_gaps(M, r)
    return LelaReport(
        factorization=F,
        spectral_err=sp,
        fro_err=fro,
        oracle_spectral=osp,
        oracle_fro=ofro,
        sample_count=samples.size,
        passes_over_M=passes,
    )
