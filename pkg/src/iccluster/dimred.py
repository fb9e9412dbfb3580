"""Low-rank representations of a data matrix: truncated SVD, PCA and NMF (ACLS)."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data_model import DataMatrix, ICCError, PreconditionError, as_data_matrix

METHODS = ("svd", "pca", "nmf")

# above this many entries a sparse input is not densified for the SVD
_DENSE_LIMIT = 4_000_000


@dataclass(frozen=True, eq=False)
class ReducedMatrix:
    values: np.ndarray
    method: str
    rank: int
    source_hash: str

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class NmfFactors:
    W: np.ndarray
    H: np.ndarray
    residual_history: np.ndarray

    @property
    def residual(self) -> float:
        return float(self.residual_history[-1])


def fingerprint(X: DataMatrix) -> str:
    h = hashlib.sha1()
    vals = X.values
    h.update(str(vals.shape).encode())
    if sp.issparse(vals):
        for part in (vals.indptr, vals.indices, vals.data):
            h.update(np.ascontiguousarray(part).tobytes())
    else:
        h.update(np.ascontiguousarray(vals).tobytes())
    return h.hexdigest()[:16]


def _check_rank(r, n, m):
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(n, m):
        raise ICCError(f"rank {r} out of range 1..{min(n, m)}")


def _fix_signs(U, V):
    # largest-magnitude entry of each right singular vector made positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def truncated_svd(X, r: int):
    """Top-r singular triplets of X.

    Returns:
        (U, S, V) with U n x r, S descending length r, V m x r, so that
        ``U @ np.diag(S) @ V.T`` is the best rank-r approximation of X.
    """
    X = as_data_matrix(X)
    n, m = X.shape
    _check_rank(r, n, m)
    if X.sparse and n * m > _DENSE_LIMIT and r < min(n, m):
        U, S, Vt = spla.svds(X.values, k=r, tol=1e-8, random_state=0)
        order = np.argsort(S)[::-1]
        U, S, V = U[:, order], S[order], Vt[order].T
    else:
        U, S, Vt = np.linalg.svd(X.dense(), full_matrices=False)
        U, S, V = U[:, :r], S[:r], Vt[:r].T
    U, V = _fix_signs(U, V)
    return U, S, V


def zscore_columns(A: np.ndarray) -> np.ndarray:
    """Column-wise z-scores; zero-variance columns are dropped."""
    mu = A.mean(axis=0)
    sd = A.std(axis=0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(mu))
    return (A[:, keep] - mu[keep]) / sd[keep]


def _revive(F, rng, axis):
    """Re-seed components that projection zeroed out entirely, in place.

    A zero row of H (or column of W) makes the next least-squares solve
    rank deficient and the component never recovers.
    """
    dead = ~np.any(F > 0, axis=axis)
    if not dead.any():
        return
    scale = F.mean() if F.any() else 1.0
    if axis == 1:
        F[dead] = scale * (1.0 - rng.random((int(dead.sum()), F.shape[1])))
    else:
        F[:, dead] = scale * (1.0 - rng.random((F.shape[0], int(dead.sum()))))


def nmf_acls(X, r: int, max_iters: int = 200, tol: float = 1e-4, seed=0) -> NmfFactors:
    """Nonnegative factorization X ~ W H by alternating constrained least squares.

    Each half-step is an unregularized least-squares solve followed by
    projection of negative entries to zero. W starts uniform in (0, 1].
    Iteration stops after ``max_iters`` or once the relative change of the
    Frobenius residual drops below ``tol``. A component zeroed out entirely
    by the projection is re-seeded with random positive entries.
    """
    X = as_data_matrix(X)
    n, m = X.shape
    if not X.nonneg:
        raise PreconditionError("NMF requires a nonnegative data matrix")
    _check_rank(r, n, m)
    A = X.values
    normX2 = float(A.multiply(A).sum()) if X.sparse else float(np.sum(A * A))
    if normX2 == 0.0:
        raise ICCError("NMF of an all-zero matrix is degenerate")

    rng = np.random.default_rng(seed)
    W = 1.0 - rng.random((n, r))
    history = []

    def residual(W, H):
        # ||X - WH||^2 = ||X||^2 - 2 tr(H^T W^T X) + tr(W^T W H H^T)
        WtX = np.asarray(A.T @ W).T
        val = normX2 - 2.0 * np.sum(WtX * H) + np.sum((W.T @ W) * (H @ H.T))
        return np.sqrt(max(val, 0.0))

    for _ in range(max_iters):
        WtX = np.asarray(A.T @ W).T
        H = np.linalg.lstsq(W.T @ W, WtX, rcond=None)[0]
        np.maximum(H, 0.0, out=H)
        _revive(H, rng, axis=1)
        XHt = np.asarray(A @ H.T)
        W = np.linalg.lstsq(H @ H.T, XHt.T, rcond=None)[0].T
        np.maximum(W, 0.0, out=W)
        _revive(W, rng, axis=0)
        history.append(residual(W, H))
        if len(history) > 1:
            prev = history[-2]
            if prev == 0.0 or abs(prev - history[-1]) / prev < tol:
                break
        if history[-1] == 0.0:
            break
    return NmfFactors(W=W, H=H, residual_history=np.array(history))


def reduce(X, method: str, r: int, seed=0) -> ReducedMatrix:
    """Project the rows of X to r dimensions.

    ``svd`` returns the scores U*S of X; ``pca`` the scores of the
    column-wise z-scored X (constant columns dropped first); ``nmf`` the
    coefficient matrix W of an ACLS factorization.
    """
    X = as_data_matrix(X)
    if method not in METHODS:
        raise ICCError(f"unknown reduction {method!r}; expected one of {METHODS}")
    src = fingerprint(X)
    if method == "svd":
        U, S, _ = truncated_svd(X, r)
        vals = U * S
    elif method == "pca":
        Z = zscore_columns(X.dense())
        if Z.shape[1] == 0:
            raise ICCError("every column is constant; PCA is undefined")
        _check_rank(r, *Z.shape)
        U, S, _ = truncated_svd(Z, r)
        vals = U * S
    else:
        vals = nmf_acls(X, r, seed=seed).W
    vals = np.ascontiguousarray(vals)
    vals.setflags(write=False)
    return ReducedMatrix(values=vals, method=method, rank=r, source_hash=src)
