"""Small dense linear algebra: one-sided Jacobi SVD."""

from __future__ import annotations

import numpy as np
import scipy.linalg


def _round_robin(n: int):
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        yield np.array([p for p in pairs if -1 not in p], dtype=np.int64).reshape(-1, 2)
        players = [players[0]] + [players[-1]] + players[1:-1]


def _hestenes_rows(H: np.ndarray, tol: float, max_sweeps: int):
    """Orthogonalize the rows of ``H`` by plane rotations; returns (H', W) with H' = W H."""
    H = H.copy()
    n = H.shape[0]
    W = np.eye(n)
    schedule = [p for p in _round_robin(n) if len(p)]
    for _ in range(max_sweeps):
        off = 0.0
        for pairs in schedule:
            i, j = pairs[:, 0], pairs[:, 1]
            hi, hj = H[i], H[j]
            a = np.einsum("ij,ij->i", hi, hi)
            b = np.einsum("ij,ij->i", hj, hj)
            g = np.einsum("ij,ij->i", hi, hj)
            scale = np.sqrt(a * b)
            rel = np.zeros_like(g)
            np.divide(np.abs(g), scale, out=rel, where=scale > 0)
            off = max(off, float(rel.max(initial=0.0)))
            rot = rel > tol
            if not rot.any():
                continue
            i, j, a, b, g = i[rot], j[rot], a[rot], b[rot], g[rot]
            hi, hj = hi[rot], hj[rot]
            zeta = (b - a) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = (c * t)[:, None]
            c = c[:, None]
            H[i], H[j] = c * hi - s * hj, s * hi + c * hj
            wi, wj = W[i], W[j]
            W[i], W[j] = c * wi - s * wj, s * wi + c * wj
        if off <= tol:
            break
    return H, W


def jacobi_svd(A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """Thin SVD ``A = U @ diag(s) @ Vt`` by one-sided Jacobi rotations.

    The matrix is first reduced to a square triangular factor with
    column-pivoted QR, which keeps the number of Jacobi sweeps small.
    Singular values come back in non-increasing order; singular vectors
    paired with a zero singular value are zero.
    """
    A = np.asarray(A, dtype=np.float64)
    transposed = A.shape[1] > A.shape[0]
    M = A.T if transposed else A
    # M P = Q R  with R square (n x n)
    Q, R, perm = scipy.linalg.qr(M, mode="economic", pivoting=True)
    # rows of R^T are the columns of R; orthogonalizing them gives R^T = Ux S Vx^T
    H, W = _hestenes_rows(R.T.copy(), tol, max_sweeps)
    s = np.linalg.norm(H, axis=1)
    order = np.argsort(-s, kind="stable")
    s, H, W = s[order], H[order], W[order]
    Ux = np.zeros_like(H)  # rows are left vectors of R^T
    nz = s > 0
    Ux[nz] = H[nz] / s[nz, None]
    # R^T = W^T diag(s) Ux  =>  R = Ux^T diag(s) W,  M = Q R P^T
    U_m = Q @ Ux.T
    V_m = np.zeros_like(W)
    V_m[perm] = W.T
    if transposed:
        return V_m, s, U_m.T
    return U_m, s, V_m.T


def numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    tol = s[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.sum(s > tol))
