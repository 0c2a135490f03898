"""Independent reference implementations used only to check the library.

These deliberately avoid the code paths under test: statistics by explicit
double loops, SVD via cyclic Jacobi on the Gram matrix, orthonormalization by
modified Gram-Schmidt, and 2x2 solves by the closed-form inverse.
"""
import numpy as np


def naive_stats(arr):
    """Double-loop recomputation of the matrix statistics."""
    n, d = arr.shape
    row_sq = np.zeros(n)
    col_sq = np.zeros(d)
    row_l1 = np.zeros(n)
    nnz = 0
    for i in range(n):
        for j in range(d):
            v = arr[i, j]
            row_sq[i] += v * v
            col_sq[j] += v * v
            row_l1[i] += abs(v)
            if v != 0.0:
                nnz += 1
    return row_sq, col_sq, row_l1, float(row_sq.sum()), float(row_l1.sum()), nnz


def cyclic_jacobi_eigh(S, sweeps=60, tol=1e-15):
    """Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations."""
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * max(np.abs(np.diag(A)).max(), 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = 0.5 * np.arctan2(2.0 * A[p, q], A[q, q] - A[p, p])
                c, s = np.cos(theta), np.sin(theta)
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                A = rot.T @ A @ rot
                V = V @ rot
    lam = np.diag(A).copy()
    order = np.argsort(lam)[::-1]
    return lam[order], V[:, order]


def jacobi_svd(arr):
    """Full SVD built from the Jacobi eigendecomposition of arr.T @ arr."""
    arr = np.asarray(arr, dtype=np.float64)
    lam, V = cyclic_jacobi_eigh(arr.T @ arr)
    lam = np.clip(lam, 0.0, None)
    sigma = np.sqrt(lam)
    U = np.zeros((arr.shape[0], sigma.size))
    for k in range(sigma.size):
        if sigma[k] > 1e-12 * (sigma[0] if sigma.size else 1.0):
            U[:, k] = (arr @ V[:, k]) / sigma[k]
    return U, sigma, V


def modified_gram_schmidt(X):
    """Orthonormal basis for range(X) by modified Gram-Schmidt."""
    X = np.array(X, dtype=np.float64)
    n, k = X.shape
    Q = np.zeros((n, k))
    for j in range(k):
        v = X[:, j].copy()
        for i in range(j):
            v -= (Q[:, i] @ v) * Q[:, i]
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError(f"column {j} dependent")
        Q[:, j] = v / norm
    return Q


def inv_2x2(B):
    """Closed-form inverse of a 2x2 matrix."""
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    return np.array([[B[1, 1], -B[0, 1]], [-B[1, 0], B[0, 0]]]) / det


def weighted_ls_2x2(targets):
    """Normal-equation solve for rank 2 via the closed-form inverse."""
    B = np.zeros((2, 2))
    z = np.zeros(2)
    for w, y, g in targets:
        g = np.asarray(g, dtype=np.float64)
        B += w * np.outer(g, g)
        z += w * y * g
    return inv_2x2(B) @ z


def spectral_norm_dense(arr):
    """Exact spectral norm through the dense SVD."""
    return float(np.linalg.svd(np.asarray(arr, dtype=np.float64), compute_uv=False)[0])
