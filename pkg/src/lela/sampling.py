"""Element-sampling distributions and the samplers that draw from them.

Two laws are implemented.  For a single matrix M the per-entry intensity is

    q(i, j) = m * ( (|M^i|^2 + |M_j|^2) / (2 (n + d) |M|_F^2)
                    + |M_ij| / (2 |M|_{1,1}) )

clipped to the inclusion probability min(q, 1).  For a product A @ B the
intensity uses only row norms of A and column norms of B:

    q(i, j) = m * ( |A^i|^2 / (n2 |A|_F^2) + |B_j|^2 / (n1 |B|_F^2) ).

The exact Bernoulli sampler visits every cell (O(n d), reference behavior);
the fast multinomial sampler draws m entries in O(nnz + m log d) by first
drawing per-row counts from the row marginal and then drawing columns within
each touched row, with replacement and duplicates collapsed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from . import rng
from .errors import DegenerateInputError, ParameterError
from .linalg import DenseMatrix, LinearOperator, MatrixStats, compute_stats

SAMPLES_HEADER = "%lela-samples"


class OpCounter:
    """Debug accumulator for the sampler's work units."""

    __slots__ = ("ops",)

    def __init__(self):
        self.ops = 0

    def add(self, amount: int) -> None:
        self.ops += int(amount)


class SampleSet:
    """Observed entries (i, j, value, weight) with row/column adjacency.

    Entries are kept sorted by (row, col); duplicates are rejected.  Weights
    are the reciprocal inclusion probabilities and must be positive.
    """

    def __init__(self, n, d, rows, cols, vals, weights):
        self.n = int(n)
        self.d = int(d)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape == weights.shape):
            raise ParameterError("entry arrays must have identical lengths")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n:
                raise ParameterError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.d:
                raise ParameterError("column index out of range")
            if np.any(weights <= 0):
                raise ParameterError("weights must be strictly positive")
            order = np.lexsort((cols, rows))
            rows, cols, vals, weights = rows[order], cols[order], vals[order], weights[order]
            key = rows[:-1] == rows[1:]
            if np.any(key & (cols[:-1] == cols[1:])):
                raise ParameterError("duplicate (i, j) entries are not allowed")
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self.weights = weights
        self._row_ptr = np.concatenate(
            ([0], np.cumsum(np.bincount(rows, minlength=self.n)))
        )
        self._col_order = np.lexsort((rows, cols))
        self._col_ptr = np.concatenate(
            ([0], np.cumsum(np.bincount(cols, minlength=self.d)))
        )
        self._csr = None

    @property
    def size(self) -> int:
        return int(self.rows.size)

    def row_entries(self, i: int) -> np.ndarray:
        """Positions of the entries stored for row i."""
        return np.arange(self._row_ptr[i], self._row_ptr[i + 1])

    def col_entries(self, j: int) -> np.ndarray:
        """Positions of the entries stored for column j."""
        return self._col_order[self._col_ptr[j] : self._col_ptr[j + 1]]

    def observed_rows(self) -> np.ndarray:
        return np.unique(self.rows)

    def observed_cols(self) -> np.ndarray:
        return np.unique(self.cols)

    def subset(self, positions: np.ndarray) -> "SampleSet":
        """New SampleSet holding the entries at the given positions."""
        return SampleSet(
            self.n,
            self.d,
            self.rows[positions],
            self.cols[positions],
            self.vals[positions],
            self.weights[positions],
        )

    def weighted_csr(self) -> scipy.sparse.csr_matrix:
        """Sparse matrix of weight * value at the sampled cells, 0 elsewhere."""
        if self._csr is None:
            self._csr = scipy.sparse.csr_matrix(
                (self.weights * self.vals, (self.rows, self.cols)),
                shape=(self.n, self.d),
            )
        return self._csr

    def weighted_operator(self) -> LinearOperator:
        """Operator view of the reweighted sampled matrix."""
        csr = self.weighted_csr()
        csc = csr.T.tocsr()
        return LinearOperator(self.n, self.d, lambda x: csr @ x, lambda y: csc @ y)

    def to_text(self, path) -> None:
        """Write the `i j value weight` triple format (0-based indices)."""
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{SAMPLES_HEADER} {self.n} {self.d} {self.size}\n")
            for i, j, v, w in zip(self.rows, self.cols, self.vals, self.weights):
                fh.write(f"{i} {j} {float(v)!r} {float(w)!r}\n")

    @staticmethod
    def from_text(path) -> "SampleSet":
        with open(path, "r", encoding="ascii") as fh:
            header = fh.readline().split()
            if len(header) != 4 or header[0] != SAMPLES_HEADER:
                raise ParameterError(f"missing {SAMPLES_HEADER} header")
            n, d, count = (int(t) for t in header[1:])
            rows = np.empty(count, dtype=np.int64)
            cols = np.empty(count, dtype=np.int64)
            vals = np.empty(count)
            weights = np.empty(count)
            for k in range(count):
                parts = fh.readline().split()
                rows[k], cols[k] = int(parts[0]), int(parts[1])
                vals[k], weights[k] = float(parts[2]), float(parts[3])
        return SampleSet(n, d, rows, cols, vals, weights)


@dataclass(frozen=True)
class SamplingPlan:
    """Precomputed element-sampling law for one matrix.

    ``row_marginal`` is the multinomial row law; ``within_row_base`` the
    column-norm part of the within-row law (the per-row |M_ij| correction is
    applied lazily when a row is actually sampled).
    """

    m: int
    stats: MatrixStats
    n: int
    d: int
    matrix: DenseMatrix
    row_marginal: np.ndarray
    within_row_base: np.ndarray
    mode: str = "element"

    def intensity_row(self, i: int) -> np.ndarray:
        """Unclipped q(i, j) for all columns j of row i."""
        s = self.stats
        norm_term = (s.row_sq_norms[i] + s.col_sq_norms) / (
            2.0 * (self.n + self.d) * s.fro_sq
        )
        l1_term = np.abs(self.matrix.row(i)) / (2.0 * s.l11)
        return self.m * (norm_term + l1_term)

    def intensity(self, i: int, j: int) -> float:
        s = self.stats
        norm_term = (s.row_sq_norms[i] + s.col_sq_norms[j]) / (
            2.0 * (self.n + self.d) * s.fro_sq
        )
        l1_term = abs(float(self.matrix.data[i, j])) / (2.0 * s.l11)
        return float(self.m * (norm_term + l1_term))

    def inclusion_probabilities_row(self, i: int) -> np.ndarray:
        return np.minimum(self.intensity_row(i), 1.0)

    def inclusion_probability(self, i: int, j: int) -> float:
        return min(self.intensity(i, j), 1.0)


def build_plan(M: DenseMatrix, m: int, stats: MatrixStats | None = None) -> SamplingPlan:
    """Build the element-sampling plan; one stats pass plus O(n + d) setup."""
    if m < 1:
        raise ParameterError("sample budget m must be at least 1")
    if stats is None:
        stats = compute_stats(M)
    if stats.l11 <= 0.0 or stats.fro_sq <= 0.0:
        raise DegenerateInputError("all-zero matrix has no sampling distribution")
    n, d = M.shape
    row_marginal = 0.5 * (
        d * stats.row_sq_norms / ((n + d) * stats.fro_sq) + 1.0 / (n + d)
    ) + 0.5 * stats.row_l1 / stats.l11
    within_row_base = 0.5 * stats.col_sq_norms / stats.fro_sq
    return SamplingPlan(
        m=int(m),
        stats=stats,
        n=n,
        d=d,
        matrix=M,
        row_marginal=row_marginal,
        within_row_base=within_row_base,
    )


def _require_same_matrix(plan: SamplingPlan, M: DenseMatrix) -> None:
    if plan.matrix is not M:
        raise ParameterError("plan was built from a different matrix")


def draw_bernoulli(plan: SamplingPlan, M: DenseMatrix, seed: int = 0) -> SampleSet:
    """Reference sampler: include each cell independently with its probability.

    Visits every cell (one audited pass); cells with saturated probability 1
    are included deterministically.  Row i draws from the stream
    (seed, TAG_BERNOULLI, i), so the outcome is independent of row ordering.
    """
    _require_same_matrix(plan, M)
    rows_acc, cols_acc, vals_acc, wts_acc = [], [], [], []
    for i in range(plan.n):
        p = plan.inclusion_probabilities_row(i)
        u = rng.stream(seed, rng.TAG_BERNOULLI, i).random(plan.d)
        js = np.flatnonzero(u < p)
        if js.size:
            rows_acc.append(np.full(js.size, i, dtype=np.int64))
            cols_acc.append(js)
            vals_acc.append(M.row(i)[js])
            wts_acc.append(1.0 / p[js])
    M.note_pass()
    return _concat_samples(plan.n, plan.d, rows_acc, cols_acc, vals_acc, wts_acc)


def draw_multinomial(
    plan: SamplingPlan,
    M: DenseMatrix,
    seed: int = 0,
    counter: OpCounter | None = None,
    draw_log: list | None = None,
) -> SampleSet:
    """Fast sampler: m total draws via row marginal then within-row columns.

    Draws collapse to one stored entry per distinct cell; the stored weight is
    the reciprocal of the Bernoulli inclusion probability, not a
    collision-corrected one.  ``counter`` (when given) accumulates work units
    and ``draw_log`` records every raw (i, j) draw before deduplication.
    """
    _require_same_matrix(plan, M)
    n, d = plan.n, plan.d
    log_d = max(1, int(np.ceil(np.log2(max(d, 2)))))
    counts = rng.stream(seed, rng.TAG_ROW_COUNTS).multinomial(plan.m, plan.row_marginal)
    if counter is not None:
        counter.add(n + plan.m)
    rows_acc, cols_acc, vals_acc, wts_acc = [], [], [], []
    for i in np.flatnonzero(counts):
        row = M.row(i)
        weights_in_row = plan.within_row_base + 0.5 * np.abs(row) / plan.stats.l11
        weights_in_row = weights_in_row / weights_in_row.sum()
        draws = rng.stream(seed, rng.TAG_ROW_DRAWS, i).choice(
            d, size=int(counts[i]), replace=True, p=weights_in_row
        )
        if draw_log is not None:
            draw_log.extend((int(i), int(j)) for j in draws)
        js = np.unique(draws)
        p = np.minimum(plan.intensity_row(i)[js], 1.0)
        rows_acc.append(np.full(js.size, i, dtype=np.int64))
        cols_acc.append(js)
        vals_acc.append(row[js])
        wts_acc.append(1.0 / p)
        if counter is not None:
            # two O(d) table builds (within-row law, intensity row) plus the
            # binary-search cost of the draws themselves
            counter.add(2 * d + int(counts[i]) * log_d)
    M.note_pass()
    return _concat_samples(n, d, rows_acc, cols_acc, vals_acc, wts_acc)


def _concat_samples(n, d, rows_acc, cols_acc, vals_acc, wts_acc) -> SampleSet:
    if rows_acc:
        return SampleSet(
            n,
            d,
            np.concatenate(rows_acc),
            np.concatenate(cols_acc),
            np.concatenate(vals_acc),
            np.concatenate(wts_acc),
        )
    return SampleSet(n, d, [], [], [], [])


@dataclass(frozen=True)
class ProductSamplingPlan:
    """Sampling law for entries of A @ B without forming the product."""

    m: int
    n1: int
    n2: int
    inner: int
    row_sq_norms_a: np.ndarray
    col_sq_norms_b: np.ndarray
    fro_sq_a: float
    fro_sq_b: float
    a: DenseMatrix
    b: DenseMatrix
    mode: str = "product"

    def intensity_row(self, i: int) -> np.ndarray:
        return self.m * (
            self.row_sq_norms_a[i] / (self.n2 * self.fro_sq_a)
            + self.col_sq_norms_b / (self.n1 * self.fro_sq_b)
        )

    def intensity(self, i: int, j: int) -> float:
        return float(
            self.m
            * (
                self.row_sq_norms_a[i] / (self.n2 * self.fro_sq_a)
                + self.col_sq_norms_b[j] / (self.n1 * self.fro_sq_b)
            )
        )

    def inclusion_probabilities_row(self, i: int) -> np.ndarray:
        return np.minimum(self.intensity_row(i), 1.0)

    def inclusion_probability(self, i: int, j: int) -> float:
        return min(self.intensity(i, j), 1.0)

    def row_trim_scores(self) -> np.ndarray:
        """Surrogate row scores |A^i| / |A|_F used to trim the left factor."""
        return np.sqrt(self.row_sq_norms_a / self.fro_sq_a)


def build_product_plan(A: DenseMatrix, B: DenseMatrix, m: int) -> ProductSamplingPlan:
    """Plan for sampling entries of A @ B; one pass over each input."""
    if m < 1:
        raise ParameterError("sample budget m must be at least 1")
    if A.n_cols != B.n_rows:
        raise ParameterError(
            f"inner dimensions disagree: {A.shape} cannot multiply {B.shape}"
        )
    a, b = A.data, B.data
    row_sq_a = np.einsum("ij,ij->i", a, a)
    col_sq_b = np.einsum("ij,ij->j", b, b)
    A.note_pass()
    B.note_pass()
    fro_a = float(row_sq_a.sum())
    fro_b = float(col_sq_b.sum())
    if fro_a <= 0.0 or fro_b <= 0.0:
        raise DegenerateInputError("zero factor matrix has no sampling distribution")
    return ProductSamplingPlan(
        m=int(m),
        n1=A.n_rows,
        n2=B.n_cols,
        inner=A.n_cols,
        row_sq_norms_a=row_sq_a,
        col_sq_norms_b=col_sq_b,
        fro_sq_a=fro_a,
        fro_sq_b=fro_b,
        a=A,
        b=B,
    )


def materialize_product_samples(
    A: DenseMatrix, B: DenseMatrix, plan: ProductSamplingPlan, seed: int = 0
) -> SampleSet:
    """Draw product cells Bernoulli-style and fill them with exact dot products."""
    if plan.a is not A or plan.b is not B:
        raise ParameterError("plan was built from different matrices")
    rows_acc, cols_acc, vals_acc, wts_acc = [], [], [], []
    for i in range(plan.n1):
        p = plan.inclusion_probabilities_row(i)
        u = rng.stream(seed, rng.TAG_PRODUCT, i).random(plan.n2)
        js = np.flatnonzero(u < p)
        if js.size:
            rows_acc.append(np.full(js.size, i, dtype=np.int64))
            cols_acc.append(js)
            vals_acc.append(A.row(i) @ B.data[:, js])
            wts_acc.append(1.0 / p[js])
    return _concat_samples(plan.n1, plan.n2, rows_acc, cols_acc, vals_acc, wts_acc)


def saturating_sample_count(M: DenseMatrix, stats: MatrixStats | None = None) -> int:
    """Smallest m that saturates every cell's inclusion probability to 1."""
    if stats is None:
        stats = compute_stats(M)
    if stats.fro_sq <= 0.0:
        raise DegenerateInputError("all-zero matrix cannot saturate")
    n, d = M.shape
    min_pair = stats.row_sq_norms.min() + stats.col_sq_norms.min()
    if min_pair <= 0.0:
        raise DegenerateInputError("a zero row or column prevents saturation")
    return int(np.ceil(2.0 * (n + d) * stats.fro_sq / min_pair)) + 1
