"""The ensemble's clustering algorithms.

Four work on data matrices (spherical k-means, PDDP, PDDP-initialized
k-means, NMF clustering); three work on similarity matrices (PIC, NCut,
NJW). Every algorithm returns exactly the requested number of non-empty
clusters or raises.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data_model import (
    Clustering,
    DataMatrix,
    ICCError,
    PreconditionError,
    as_data_matrix,
    partition_from_labels,
)
from .dimred import nmf_acls

DATA_ALGORITHMS = ("kmeans", "pddp", "pddp-kmeans", "nmf")
GRAPH_ALGORITHMS = ("pic", "ncut", "njw")
ALGORITHMS = DATA_ALGORITHMS + GRAPH_ALGORITHMS

_DENSE_EIG_LIMIT = 2000


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric, nonnegative n x n affinity matrix with positive diagonal."""

    values: np.ndarray

    def __post_init__(self):
        S = np.array(self.values.toarray() if sp.issparse(self.values) else self.values, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ICCError(f"similarity matrix must be square, got shape {S.shape}")
        if not np.all(np.isfinite(S)):
            raise ICCError("similarity matrix contains NaN or Inf")
        if S.min() < 0:
            raise ICCError("similarity matrix has negative entries")
        if not np.allclose(S, S.T, rtol=0, atol=1e-10 * max(1.0, S.max())):
            raise ICCError("similarity matrix is not symmetric")
        S.setflags(write=False)
        object.__setattr__(self, "values", S)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class KmeansResult:
    clustering: Clustering
    objective: float
    restarts_used: int
    objective_trace: tuple[float, ...] = ()


def as_similarity(S) -> SimilarityMatrix:
    if isinstance(S, SimilarityMatrix):
        return S
    if hasattr(S, "M"):  # ConsensusMatrix
        return SimilarityMatrix(S.M)
    return SimilarityMatrix(S)


def cosine_similarity(X) -> SimilarityMatrix:
    """Cosine similarity of the rows of a nonnegative data matrix."""
    X = as_data_matrix(X)
    if not X.nonneg:
        raise PreconditionError("cosine similarity of signed data is not a valid affinity")
    Y = _unit_rows(X.values)
    S = Y @ Y.T
    S = S.toarray() if sp.issparse(S) else np.asarray(S)
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    return SimilarityMatrix(np.clip(S, 0.0, None))


def _check_k(k, n):
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ICCError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise ICCError(f"cannot form {k} clusters from {n} objects")


def _row_norms(A):
    if sp.issparse(A):
        return np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    return np.linalg.norm(A, axis=1)


def _unit_rows(A):
    norms = _row_norms(A)
    if np.any(norms == 0):
        bad = int(np.flatnonzero(norms == 0)[0])
        raise PreconditionError(f"row {bad} is all zeros; cannot normalize")
    if sp.issparse(A):
        return sp.diags(1.0 / norms) @ A
    return A / norms[:, None]


def _as_matrix(X):
    """Raw numeric matrix from a DataMatrix, ReducedMatrix, consensus or array."""
    if isinstance(X, DataMatrix):
        return X.values
    if hasattr(X, "M"):
        return np.asarray(X.M, dtype=float)
    if hasattr(X, "values"):
        return X.values
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=float)
    return np.asarray(X, dtype=float)


def _indicator(labels, k):
    n = len(labels)
    return sp.csr_matrix((np.ones(n), (labels, np.arange(n))), shape=(k, n))


def _spherical_centroids(Y, labels, k):
    if sp.issparse(Y):
        C = (_indicator(labels, k) @ Y).toarray()
    else:
        C = (labels[None, :] == np.arange(k)[:, None]).astype(float) @ Y
    norms = np.linalg.norm(C, axis=1)
    norms[norms == 0] = 1.0
    return C / norms[:, None]


def _cosines(Y, C):
    return np.asarray(Y @ C.T)


def _repair_empty(labels, k, score):
    """Give each empty cluster the worst-fitting point of a cluster with >= 2 members.

    ``score`` holds each point's fit to its own centroid (higher is better).
    """
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for j in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.flatnonzero(movable)
        i = cand[np.argmin(score[cand])]
        counts[labels[i]] -= 1
        labels[i] = j
        counts[j] = 1
        score = score.copy()
        score[i] = np.inf
    return labels


def _spkmeans_run(Y, C, max_iters):
    """One spherical k-means descent from centroids C. Y rows are unit length."""
    k = C.shape[0]
    n = Y.shape[0]
    rows = np.arange(n)
    labels = None
    trace = []
    for _ in range(max_iters):
        cos = _cosines(Y, C)
        if labels is not None:
            # objective of the previous assignment under its updated centroids
            trace.append(float(np.sum(2.0 - 2.0 * cos[rows, labels])))
        new = np.argmax(cos, axis=1)
        new = _repair_empty(new, k, cos[rows, new])
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        C = _spherical_centroids(Y, labels, k)
    else:
        if labels is not None:
            trace.append(float(np.sum(2.0 - 2.0 * _cosines(Y, C)[rows, labels])))
    if labels is None:
        labels = np.zeros(n, dtype=np.int64)
        C = _spherical_centroids(Y, labels, k)
    fit = _cosines(Y, C)[np.arange(n), labels]
    objective = float(max(np.sum(2.0 - 2.0 * fit), 0.0))
    return labels, objective, trace


def spherical_kmeans(X, k: int, restarts: int = 100, max_iters: int = 300, seed=0) -> KmeansResult:
    """Spherical k-means, best of ``restarts`` random initializations.

    Rows are normalized to unit length; points go to the centroid of
    largest cosine and centroids are normalized cluster means. The
    objective is the sum of squared distances from each unit row to its
    centroid.
    """
    A = _as_matrix(X)
    n = A.shape[0]
    _check_k(k, n)
    Y = _unit_rows(A)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        idx = rng.choice(n, size=k, replace=False)
        C = Y[idx]
        C = C.toarray() if sp.issparse(C) else np.array(C)
        labels, obj, trace = _spkmeans_run(Y, C, max_iters)
        if best is None or obj < best[1]:
            best = (labels, obj, trace)
    labels, obj, trace = best
    return KmeansResult(partition_from_labels(labels), obj, max(1, restarts), tuple(trace))


def spherical_objective(X, clustering) -> float:
    """Objective of a fixed partition with its normalized-mean centroids."""
    Y = _unit_rows(_as_matrix(X))
    labels = np.asarray(clustering.labels)
    C = _spherical_centroids(Y, labels, clustering.k)
    fit = _cosines(Y, C)[np.arange(len(labels)), labels]
    return float(max(np.sum(2.0 - 2.0 * fit), 0.0))


def _scatter(A, idx):
    B = A[idx]
    if sp.issparse(B):
        mu = np.asarray(B.mean(axis=0)).ravel()
        return float(B.multiply(B).sum() - len(idx) * mu @ mu)
    return float(np.sum((B - B.mean(axis=0)) ** 2))


def _principal_projection(A, idx):
    """Projections of the centered rows A[idx] onto their leading principal direction."""
    B = A[idx]
    if sp.issparse(B):
        B = sp.csr_matrix(B)
        mu = np.asarray(B.mean(axis=0)).ravel()
        if min(B.shape) <= 2 or B.shape[0] * B.shape[1] <= 250_000:
            Bc = B.toarray() - mu
        else:
            Bc = spla.LinearOperator(
                B.shape,
                matvec=lambda v: B @ v - mu @ v,
                rmatvec=lambda u: B.T @ u - mu * u.sum(),
                dtype=float,
            )
            _, _, vt = spla.svds(Bc, k=1, tol=1e-10, random_state=0)
            return np.asarray(B @ vt[0] - mu @ vt[0]).ravel()
    else:
        Bc = B - B.mean(axis=0)
    _, _, vt = np.linalg.svd(Bc, full_matrices=False)
    return Bc @ vt[0]


def pddp(X, k: int) -> Clustering:
    """Principal direction divisive partitioning into k leaves.

    The leaf with the largest scatter (lowest id on ties) is split by the
    sign of the projections of its centered rows onto their leading
    principal direction. A leaf whose projections are all equal is split
    at its median member index instead.
    """
    A = _as_matrix(X)
    if not sp.issparse(A):
        A = np.asarray(A, dtype=float)
    n = A.shape[0]
    _check_k(k, n)
    leaves = [np.arange(n)]
    scatter = [_scatter(A, leaves[0])]
    while len(leaves) < k:
        cand = [i for i, leaf in enumerate(leaves) if len(leaf) >= 2]
        j = max(cand, key=lambda i: (scatter[i], -i))
        idx = leaves[j]
        proj = _principal_projection(A, idx)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(proj))) if len(proj) else 1.0)
        if np.ptp(proj) <= tol:
            half = len(idx) // 2
            left, right = idx[:half], idx[half:]
        else:
            left, right = idx[proj >= 0], idx[proj < 0]
            if len(right) == 0 or len(left) == 0:
                order = np.argsort(proj, kind="stable")
                half = len(idx) // 2
                left, right = np.sort(idx[order[half:]]), np.sort(idx[order[:half]])
        leaves[j] = left
        scatter[j] = _scatter(A, left)
        leaves.append(right)
        scatter.append(_scatter(A, right))
    labels = np.empty(n, dtype=np.int64)
    for i, leaf in enumerate(leaves):
        labels[leaf] = i
    return partition_from_labels(labels)


def pddp_kmeans(X, k: int, max_iters: int = 300) -> KmeansResult:
    """One spherical k-means run seeded with the centroids of the PDDP leaves."""
    A = _as_matrix(X)
    start = pddp(A, k)
    Y = _unit_rows(A)
    C = _spherical_centroids(Y, np.asarray(start.labels), k)
    labels, obj, trace = _spkmeans_run(Y, C, max_iters)
    return KmeansResult(partition_from_labels(labels), obj, 1, tuple(trace))


def nmf_cluster(X, k: int, seed=0, max_iters: int = 200, tol: float = 1e-4) -> Clustering:
    """Assign each object to its dominant coefficient in a rank-k NMF."""
    X = as_data_matrix(_as_matrix(X))
    _check_k(k, X.n)
    if not X.nonneg:
        raise PreconditionError("NMF clustering requires nonnegative input")
    if k == 1:
        return partition_from_labels(np.zeros(X.n, dtype=np.int64))
    if k > X.m:
        raise PreconditionError(f"rank-{k} NMF needs at least {k} features, got {X.m}")
    W = nmf_acls(X, k, max_iters=max_iters, tol=tol, seed=seed).W
    labels = np.argmax(W, axis=1)
    share = W[np.arange(X.n), labels] / np.maximum(W.sum(axis=1), 1e-300)
    labels = _repair_empty(labels, k, share)
    return partition_from_labels(labels)


# -- graph algorithms ---------------------------------------------------------


def _degrees(S):
    d = S.sum(axis=1)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise PreconditionError(f"vertex {bad} has zero degree")
    return d


def _kmeans_pp(Y, k, rng):
    n = Y.shape[0]
    centers = [Y[rng.integers(n)]]
    d2 = np.sum((Y - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        i = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(Y[i])
        d2 = np.minimum(d2, np.sum((Y - Y[i]) ** 2, axis=1))
    return np.array(centers)


def euclidean_kmeans(Y, k, restarts=10, max_iters=300, seed=0) -> np.ndarray:
    """Lloyd's k-means (k-means++ seeding) on the rows of a small dense embedding."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = Y.shape[0]
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    best, best_obj = None, np.inf
    for _ in range(max(1, restarts)):
        C = _kmeans_pp(Y, k, rng)
        labels = None
        for _ in range(max_iters):
            d2 = ((Y[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
            new = np.argmin(d2, axis=1)
            new = _repair_empty(new, k, -d2[np.arange(n), new])
            if labels is not None and np.array_equal(new, labels):
                break
            labels = new
            C = np.array([Y[labels == j].mean(axis=0) for j in range(k)])
        obj = float(np.sum((Y - C[labels]) ** 2))
        if best is None or obj < best_obj - 1e-12 * max(1.0, best_obj):
            best, best_obj = labels, obj
    return best


def _top_eigvecs(A, k):
    """Eigenvectors of symmetric A for its k largest eigenvalues."""
    n = A.shape[0]
    if n <= _DENSE_EIG_LIMIT or k >= n - 1:
        _, V = sla.eigh(A, subset_by_index=[n - k, n - 1])
    else:
        _, V = spla.eigsh(A, k=k, which="LA", tol=1e-10, v0=np.ones(n))
    return V[:, ::-1]


def pic(S, k: int, seed=0, max_iters: int = 1000, restarts: int = 10) -> Clustering:
    """Power iteration clustering.

    Iterates ``v <- D^-1 S v`` with L1 renormalization and stops early once
    the acceleration ``max|delta_t - delta_{t-1}|`` drops below 1e-5/n; the
    one-dimensional embedding is then clustered with k-means. The start
    vector is degree-proportional with a seeded multiplicative jitter, since
    the exact degree vector is a fixed point on regular graphs.
    """
    S = as_similarity(S).values
    n = S.shape[0]
    _check_k(k, n)
    d = _degrees(S)
    if k == 1:
        return partition_from_labels(np.zeros(n, dtype=np.int64))
    rng = np.random.default_rng(seed)
    W = S / d[:, None]
    v = d * (1.0 + 0.5 * rng.uniform(-1.0, 1.0, n))
    v /= v.sum()
    eps = 1e-5 / n
    delta_prev = None
    for _ in range(max_iters):
        w = W @ v
        w /= np.abs(w).sum()
        delta = np.abs(w - v)
        v = w
        if delta_prev is not None and np.max(np.abs(delta - delta_prev)) < eps:
            break
        delta_prev = delta
    labels = euclidean_kmeans(v, k, restarts=restarts, seed=rng.integers(2**32))
    return partition_from_labels(labels)


def ncut(S, k: int, seed=0, restarts: int = 10) -> Clustering:
    """Shi-Malik normalized cut: k-means on random-walk Laplacian eigenvectors."""
    S = as_similarity(S).values
    n = S.shape[0]
    _check_k(k, n)
    d = _degrees(S)
    if k == 1:
        return partition_from_labels(np.zeros(n, dtype=np.int64))
    dih = 1.0 / np.sqrt(d)
    V = _top_eigvecs(dih[:, None] * S * dih[None, :], k)
    emb = dih[:, None] * V
    emb /= np.max(np.abs(emb))
    return partition_from_labels(euclidean_kmeans(emb, k, restarts=restarts, seed=seed))


def njw(S, k: int, seed=0, restarts: int = 10) -> Clustering:
    """Ng-Jordan-Weiss: k-means on row-normalized top eigenvectors of D^-1/2 S D^-1/2.

    Rows of the embedding with zero norm join the cluster of their most
    similar object that has a nonzero embedding.
    """
    S = as_similarity(S).values
    n = S.shape[0]
    _check_k(k, n)
    d = _degrees(S)
    if k == 1:
        return partition_from_labels(np.zeros(n, dtype=np.int64))
    dih = 1.0 / np.sqrt(d)
    V = _top_eigvecs(dih[:, None] * S * dih[None, :], k)
    norms = np.linalg.norm(V, axis=1)
    zero = norms <= 1e-12
    good = np.flatnonzero(~zero)
    if len(good) < k:
        raise ICCError("spectral embedding has fewer than k nonzero rows")
    labels = np.empty(n, dtype=np.int64)
    labels[good] = euclidean_kmeans(V[good] / norms[good, None], k, restarts=restarts, seed=seed)
    for i in np.flatnonzero(zero):
        sims = S[i, good].copy()
        labels[i] = labels[good[np.argmax(sims)]]
    return partition_from_labels(labels)


def run_algorithm(name: str, X, k: int, seed=0, restarts: int = 100) -> Clustering:
    """Dispatch one ensemble algorithm by name.

    Data algorithms treat a consensus/similarity input as a data matrix whose
    rows are the objects. Graph algorithms need an affinity: consensus and
    similarity matrices are used as they are, a nonnegative data matrix is
    turned into its cosine matrix, and signed data raises PreconditionError.
    """
    if name not in ALGORITHMS:
        raise ICCError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
    if name in GRAPH_ALGORITHMS:
        if hasattr(X, "M") or isinstance(X, SimilarityMatrix):
            S = as_similarity(X)
        else:
            S = cosine_similarity(_as_matrix(X))
        fn = {"pic": pic, "ncut": ncut, "njw": njw}[name]
        return fn(S, k, seed=seed)
    A = _as_matrix(X)
    if name == "kmeans":
        return spherical_kmeans(A, k, restarts=restarts, seed=seed).clustering
    if name == "pddp":
        return pddp(A, k)
    if name == "pddp-kmeans":
        return pddp_kmeans(A, k).clustering
    return nmf_cluster(A, k, seed=seed)
