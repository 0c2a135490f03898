"""In-process simulation of row-partitioned distributed low-rank approximation.

Servers hold disjoint row blocks of the matrix and talk only to a central
processor (CP).  The protocol has three stages: a stats exchange that lets
every server evaluate the sampling law locally, a power-iteration
initialization of the right factor, and alternating-minimization rounds where
row updates stay on the servers and column updates are assembled at the CP
from per-column (z, B) messages.  Every transfer is recorded in a CommLedger
as a count of real numbers, which is the quantity the communication bound
speaks about; no actual networking is involved.

The sampling law used on this path is

    p(i, j) = min( m * ( (|M^i|^2 + |M_j|^2) / (2 n |M|_F^2)
                         + |M_ij| / |M|_{1,1} ), 1 )

which differs from the single-machine element law (n instead of n + d in the
norm term, and no 1/2 on the L1 term).  The centralized reference implements
the same law and the same update order so the two paths agree entrywise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from . import rng
from .errors import DegenerateInputError, ParameterError
from .linalg import (
    DenseMatrix,
    Factorization,
    orthonormal_columns,
    pseudo_solve_spd_batch,
)
from .sampling import SampleSet

KIND_COL_NORMS = "col-norms"
KIND_STATS_BROADCAST = "stats-broadcast"
KIND_COL_LISTS = "col-lists"
KIND_INIT_Y_BLOCK = "init-Y-block"
KIND_INIT_Y_PARTIAL = "init-Y-partial"
KIND_U_ROWS_LOCAL = "U-rows-local"  # audit label only; these rows are never sent
KIND_Z_AND_B = "z-and-B"
KIND_V_ROWS_BLOCK = "V-rows-block"

DIR_UP = "server->CP"
DIR_DOWN = "CP->server"

PARTITION_POLICIES = ("contiguous", "round-robin", "seeded-random")


@dataclass(frozen=True)
class Message:
    """One recorded transfer: a count of real numbers moving in one direction."""

    round: int
    direction: str
    kind: str
    payload_reals: int


class CommLedger:
    """Append-only message log with running totals per kind and per round."""

    def __init__(self):
        self.messages: list[Message] = []
        self.totals_by_kind: dict[str, int] = {}
        self.totals_by_round: dict[int, int] = {}
        self._round = -1

    def advance_round(self) -> int:
        self._round += 1
        return self._round

    @property
    def current_round(self) -> int:
        return self._round

    def record(self, round_no: int, direction: str, kind: str, payload_reals: int) -> None:
        if payload_reals <= 0:
            raise ParameterError("recorded messages must carry a positive payload")
        msg = Message(round_no, direction, kind, int(payload_reals))
        self.messages.append(msg)
        self.totals_by_kind[kind] = self.totals_by_kind.get(kind, 0) + msg.payload_reals
        self.totals_by_round[round_no] = (
            self.totals_by_round.get(round_no, 0) + msg.payload_reals
        )

    def grand_total(self) -> int:
        return sum(m.payload_reals for m in self.messages)

    def recompute_totals(self) -> tuple[dict[str, int], dict[int, int]]:
        by_kind: dict[str, int] = {}
        by_round: dict[int, int] = {}
        for m in self.messages:
            by_kind[m.kind] = by_kind.get(m.kind, 0) + m.payload_reals
            by_round[m.round] = by_round.get(m.round, 0) + m.payload_reals
        return by_kind, by_round

    def verify(self) -> bool:
        """Check the running totals against a recomputation from the log."""
        by_kind, by_round = self.recompute_totals()
        return by_kind == self.totals_by_kind and by_round == self.totals_by_round

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "direction", "kind", "reals"])
            for m in self.messages:
                writer.writerow([m.round, m.direction, m.kind, m.payload_reals])


def communication_bound(d: int, s: int, omega: int, r: int, init_rounds: int) -> int:
    """Audit bound 3 (d s + |Omega| r^2) + init_rounds * 2 |Omega| r."""
    return 3 * (d * s + omega * r * r) + init_rounds * 2 * omega * r


@dataclass
class ServerShard:
    """One server's state: its rows, its samples, and the columns it touches."""

    server_id: int
    row_set: np.ndarray
    local_rows: np.ndarray
    local_samples: SampleSet | None = None
    touched_cols: np.ndarray | None = None

    @property
    def n_local(self) -> int:
        return int(self.row_set.size)


def partition_rows(
    M: DenseMatrix, s: int, policy: str = "contiguous", seed: int = 0
) -> list[ServerShard]:
    """Split the rows of M across s servers according to the policy."""
    n = M.n_rows
    if s < 1 or s > n:
        raise ParameterError(f"server count {s} outside [1, {n}]")
    if policy not in PARTITION_POLICIES:
        raise ParameterError(f"unknown partition policy {policy!r}")
    if policy == "contiguous":
        groups = np.array_split(np.arange(n), s)
    elif policy == "round-robin":
        groups = [np.arange(k, n, s) for k in range(s)]
    else:
        perm = rng.stream(seed, rng.TAG_PARTITION).permutation(n)
        groups = [np.sort(g) for g in np.array_split(perm, s)]
    return [
        ServerShard(server_id=k, row_set=g.astype(np.int64), local_rows=M.data[g, :])
        for k, g in enumerate(groups)
    ]


def _inclusion_probabilities_row(row_vals, row_sq_i, col_sq, fro_sq, l11, m, n):
    q = m * ((row_sq_i + col_sq) / (2.0 * n * fro_sq) + np.abs(row_vals) / l11)
    return np.minimum(q, 1.0)


def _draw_shard_samples(shard, col_sq, fro_sq, l11, m, n, d, seed):
    rows_acc, cols_acc, vals_acc, wts_acc = [], [], [], []
    local_row_sq = np.einsum("ij,ij->i", shard.local_rows, shard.local_rows)
    for pos, i in enumerate(shard.row_set):
        row = shard.local_rows[pos]
        p = _inclusion_probabilities_row(row, local_row_sq[pos], col_sq, fro_sq, l11, m, n)
        u = rng.stream(seed, rng.TAG_DIST_SAMPLE, int(i)).random(d)
        js = np.flatnonzero(u < p)
        if js.size:
            rows_acc.append(np.full(js.size, i, dtype=np.int64))
            cols_acc.append(js)
            vals_acc.append(row[js])
            wts_acc.append(1.0 / p[js])
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


def dist_sample(shards: list[ServerShard], m: int, ledger: CommLedger, seed: int = 0) -> None:
    """Stats exchange plus local sampling; fills each shard in place.

    Per server the ledger gains d reals up (its column norms), one real up
    (its local L1 mass), d + 2 reals down (global column norms, |M|_F, and
    |M|_{1,1}), and one count per touched column for the column lists.
    """
    if m < 1:
        raise ParameterError("sample budget m must be at least 1")
    n = sum(sh.n_local for sh in shards)
    d = shards[0].local_rows.shape[1]
    round_no = ledger.advance_round()
    local_col_sq = []
    local_l1 = []
    for sh in shards:
        local_col_sq.append(np.einsum("ij,ij->j", sh.local_rows, sh.local_rows))
        local_l1.append(float(np.abs(sh.local_rows).sum()))
        ledger.record(round_no, DIR_UP, KIND_COL_NORMS, d)
        ledger.record(round_no, DIR_UP, KIND_STATS_BROADCAST, 1)
    col_sq = np.zeros(d)
    l11 = 0.0
    for sh_col, sh_l1 in zip(local_col_sq, local_l1):  # fixed ascending server id
        col_sq = col_sq + sh_col
        l11 += sh_l1
    fro_sq = float(col_sq.sum())
    if l11 <= 0.0 or fro_sq <= 0.0:
        raise DegenerateInputError("all-zero matrix has no sampling distribution")
    for sh in shards:
        ledger.record(round_no, DIR_DOWN, KIND_STATS_BROADCAST, d + 2)
    for sh in shards:
        sh.local_samples = _draw_shard_samples(sh, col_sq, fro_sq, l11, m, n, d, seed)
        sh.touched_cols = sh.local_samples.observed_cols()
        if sh.touched_cols.size:
            ledger.record(round_no, DIR_UP, KIND_COL_LISTS, int(sh.touched_cols.size))


def dist_init(
    shards: list[ServerShard], r: int, rounds: int, ledger: CommLedger, seed: int = 0
) -> np.ndarray:
    """Distributed power iteration for the top-r right factor.

    The CP seeds a random d x r iterate, QR-normalizes it, and broadcasts each
    server its touched-column block; every round each server returns the block
    of R^T R applied to the iterate and the CP folds the partial sums in
    ascending server id, re-normalizes, and broadcasts again.  ``rounds`` 0
    returns the seeded iterate after QR.
    """
    if rounds < 0:
        raise ParameterError("init round count must be nonnegative")
    d = shards[0].local_rows.shape[1]
    if any(sh.local_samples is None for sh in shards):
        raise ParameterError("dist_sample must run before dist_init")
    Y = orthonormal_columns(rng.stream(seed, rng.TAG_DIST_INIT).standard_normal((d, r)))
    round_no = ledger.advance_round()
    for sh in shards:
        if sh.touched_cols.size:
            ledger.record(round_no, DIR_DOWN, KIND_INIT_Y_BLOCK, int(sh.touched_cols.size) * r)
    for _ in range(rounds):
        round_no = ledger.advance_round()
        partials = []
        for sh in shards:
            csr = sh.local_samples.weighted_csr()
            # the product touches only the server's own Y block: csr has
            # support exactly on (row_set x touched_cols)
            partials.append(csr.T @ (csr @ Y))
            if sh.touched_cols.size:
                ledger.record(
                    round_no, DIR_UP, KIND_INIT_Y_PARTIAL, int(sh.touched_cols.size) * r
                )
        folded = np.zeros((d, r))
        for z in partials:  # fixed ascending server id
            folded = folded + z
        Y = orthonormal_columns(folded)
        for sh in shards:
            if sh.touched_cols.size:
                ledger.record(
                    round_no, DIR_DOWN, KIND_INIT_Y_BLOCK, int(sh.touched_cols.size) * r
                )
    return Y


def _rows_ls_update(samples: SampleSet, row_ids: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Weighted LS update of the given rows against fixed V (local, no comm)."""
    r = V.shape[1]
    local_pos = np.searchsorted(row_ids, samples.rows)
    G = V[samples.cols]
    w = samples.weights
    wy = w * samples.vals
    k = row_ids.size
    B = np.empty((k, r, r))
    z = np.empty((k, r))
    for a in range(r):
        z[:, a] = np.bincount(local_pos, weights=wy * G[:, a], minlength=k)
        for b in range(a, r):
            acc = np.bincount(local_pos, weights=w * G[:, a] * G[:, b], minlength=k)
            B[:, a, b] = acc
            B[:, b, a] = acc
    return pseudo_solve_spd_batch(B, z)


def _column_messages(samples: SampleSet, row_ids: np.ndarray, U_local: np.ndarray, d: int):
    """Per-column (z_j, B_j) partial sums from one server's samples."""
    r = U_local.shape[1]
    local_pos = np.searchsorted(row_ids, samples.rows)
    G = U_local[local_pos]
    w = samples.weights
    wy = w * samples.vals
    z = np.empty((d, r))
    B = np.empty((d, r, r))
    for a in range(r):
        z[:, a] = np.bincount(samples.cols, weights=wy * G[:, a], minlength=d)
        for b in range(a, r):
            acc = np.bincount(samples.cols, weights=w * G[:, a] * G[:, b], minlength=d)
            B[:, a, b] = acc
            B[:, b, a] = acc
    return z, B


def dist_waltmin_round(
    shards: list[ServerShard], V_current: np.ndarray, ledger: CommLedger
) -> tuple[list[np.ndarray], np.ndarray]:
    """One alternating round: local row updates, then the column update at CP.

    Every server solves the weighted LS problems for its own rows (nothing is
    sent for that), uploads per touched column a z vector in R^r and a B block
    in R^{r x r}, and receives back its block of the new right factor.
    Returns the per-server row factors and the new right factor at the CP.
    """
    d = V_current.shape[0]
    r = V_current.shape[1]
    round_no = ledger.advance_round()
    u_blocks = []
    z_total = np.zeros((d, r))
    b_total = np.zeros((d, r, r))
    for sh in shards:  # fixed ascending server id
        u_local = _rows_ls_update(sh.local_samples, sh.row_set, V_current)
        u_blocks.append(u_local)
        z_k, b_k = _column_messages(sh.local_samples, sh.row_set, u_local, d)
        z_total = z_total + z_k
        b_total = b_total + b_k
        if sh.touched_cols.size:
            ledger.record(
                round_no, DIR_UP, KIND_Z_AND_B, int(sh.touched_cols.size) * (r + r * r)
            )
    V_new = pseudo_solve_spd_batch(b_total, z_total)
    for sh in shards:
        if sh.touched_cols.size:
            ledger.record(round_no, DIR_DOWN, KIND_V_ROWS_BLOCK, int(sh.touched_cols.size) * r)
    return u_blocks, V_new


def run_distpca(
    M: DenseMatrix,
    s: int,
    r: int,
    m: int,
    iterations: int,
    init_rounds: int = 10,
    seed: int = 0,
    policy: str = "contiguous",
) -> tuple[Factorization, CommLedger]:
    """Full distributed pipeline; returns the factorization and the ledger.

    The returned left factor is gathered across servers for auditing only;
    that gather is not a protocol message and is excluded from the ledger.
    """
    if r < 1 or r > min(M.n_rows, M.n_cols):
        raise ParameterError("rank must lie in [1, min(n, d)]")
    if iterations < 1:
        raise ParameterError("iteration count must be at least 1")
    shards = partition_rows(M, s, policy=policy, seed=seed)
    ledger = CommLedger()
    dist_sample(shards, m, ledger, seed=seed)
    V = dist_init(shards, r, init_rounds, ledger, seed=seed)
    u_blocks: list[np.ndarray] = []
    for _ in range(iterations):
        u_blocks, V = dist_waltmin_round(shards, V, ledger)
    U = np.zeros((M.n_rows, r))
    for sh, block in zip(shards, u_blocks):
        U[sh.row_set] = block
    return Factorization(U, V), ledger


def total_samples(shards: list[ServerShard]) -> int:
    return sum(sh.local_samples.size for sh in shards if sh.local_samples is not None)


def centralized_sample(M: DenseMatrix, m: int, seed: int = 0) -> SampleSet:
    """Single-process draw from the distributed sampling law (same streams)."""
    a = M.data
    n, d = a.shape
    col_sq = np.einsum("ij,ij->j", a, a)
    row_sq = np.einsum("ij,ij->i", a, a)
    fro_sq = float(col_sq.sum())
    l11 = float(np.abs(a).sum())
    if l11 <= 0.0 or fro_sq <= 0.0:
        raise DegenerateInputError("all-zero matrix has no sampling distribution")
    rows_acc, cols_acc, vals_acc, wts_acc = [], [], [], []
    for i in range(n):
        row = a[i, :]
        p = _inclusion_probabilities_row(row, row_sq[i], col_sq, fro_sq, l11, m, n)
        u = rng.stream(seed, rng.TAG_DIST_SAMPLE, i).random(d)
        js = np.flatnonzero(u < p)
        if js.size:
            rows_acc.append(np.full(js.size, i, dtype=np.int64))
            cols_acc.append(js)
            vals_acc.append(row[js])
            wts_acc.append(1.0 / p[js])
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


def centralized_reference(
    M: DenseMatrix,
    r: int,
    m: int,
    iterations: int,
    init_rounds: int = 10,
    seed: int = 0,
) -> Factorization:
    """Single-process run of the exact protocol the simulator distributes.

    Same sampling law and streams, same seeded init, same update order (rows
    first, then columns), so the distributed output must match entrywise up to
    floating-point fold order.
    """
    samples = centralized_sample(M, m, seed=seed)
    n, d = M.shape
    csr = samples.weighted_csr()
    Y = orthonormal_columns(rng.stream(seed, rng.TAG_DIST_INIT).standard_normal((d, r)))
    for _ in range(init_rounds):
        Y = orthonormal_columns(csr.T @ (csr @ Y))
    V = Y
    U = np.zeros((n, r))
    all_rows = np.arange(n, dtype=np.int64)
    for _ in range(iterations):
        U = _rows_ls_update(samples, all_rows, V)
        z, B = _column_messages(samples, all_rows, U, d)
        V = pseudo_solve_spd_batch(B, z)
    return Factorization(U, V)
