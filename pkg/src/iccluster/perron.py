"""Random walks on consensus graphs and Perron-cluster estimation of k."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .consensus import (
    ConsensusMatrix,
    ICCWarning,
    apply_intolerance,
    build_consensus,
    derive_seed,
    run_ensemble,
)
from .data_model import Clustering, Ensemble, ICCError, as_clustering, as_data_matrix
from .dimred import reduce

log = logging.getLogger(__name__)

_DENSE_EIG_LIMIT = 2000

# block assignment of Markov chain states; same representation as a partition
BlockPartition = Clustering


@dataclass(frozen=True, eq=False)
class TransitionView:
    P: np.ndarray
    D: np.ndarray  # row sums of M (the diagonal of D)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    eigenvalues: np.ndarray
    gap_index: int
    gap_size: float

    @property
    def k_estimate(self) -> int:
        return self.gap_index


def _matrix(cm) -> np.ndarray:
    if isinstance(cm, ConsensusMatrix):
        return np.asarray(cm.M, dtype=float)
    if hasattr(cm, "values"):
        return np.asarray(cm.values, dtype=float)
    return np.asarray(cm, dtype=float)


def _row_sums(M):
    d = M.sum(axis=1)
    if np.any(d <= 0):
        raise ICCError(f"row {int(np.flatnonzero(d <= 0)[0])} of the consensus matrix sums to zero")
    return d


def transition_matrix(cm) -> TransitionView:
    """Row-stochastic P = D^-1 M of the random walk on the consensus graph."""
    M = _matrix(cm)
    d = _row_sums(M)
    return TransitionView(P=M / d[:, None], D=d)


def perron_gap(eigenvalues: Sequence[float]) -> tuple[int, float]:
    """Index i (1-based) maximizing lambda_i - lambda_{i+1}, and that gap."""
    lam = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    if len(lam) < 2:
        raise ICCError("need at least two eigenvalues to locate a gap")
    gaps = lam[:-1] - lam[1:]
    i = int(np.argmax(gaps))
    return i + 1, float(gaps[i])


def spectrum(cm, m_max: int = 20) -> SpectrumReport:
    """Largest eigenvalues of P = D^-1 M and the Perron gap.

    The eigenvalues are computed from the symmetric normalized Laplacian
    ``I - D^-1/2 M D^-1/2`` (similar to ``I - P``), as ``lambda = 1 - mu``
    for its ``m_max`` smallest eigenvalues ``mu``. ``m_max`` is clamped to n.
    """
    M = _matrix(cm)
    n = M.shape[0]
    if m_max < 2:
        raise ICCError(f"m_max must be at least 2, got {m_max}")
    m = min(int(m_max), n)
    d = _row_sums(M)
    dih = 1.0 / np.sqrt(d)
    L = np.eye(n) - dih[:, None] * M * dih[None, :]
    L = 0.5 * (L + L.T)
    if n <= _DENSE_EIG_LIMIT:
        mu = sla.eigh(L, eigvals_only=True, subset_by_index=[0, m - 1])
    else:
        # largest of the normalized affinity = smallest of the Laplacian
        A = np.eye(n) - L
        top = spla.eigsh(A, k=m, which="LA", tol=1e-10, return_eigenvectors=False, v0=np.ones(n))
        mu = 1.0 - top
    lam = np.sort(1.0 - mu)[::-1]
    gap_index, gap_size = perron_gap(lam)
    return SpectrumReport(eigenvalues=lam, gap_index=gap_index, gap_size=gap_size)


def deviation_from_reducibility(tv, bp) -> float:
    """Twice the largest total probability that leaves a block in one step.

    For every state the off-diagonal-block part of its row is summed (the
    diagonal block excluded); the result is 2 * the maximum over states.
    """
    P = tv.P if isinstance(tv, TransitionView) else np.asarray(tv, dtype=float)
    blocks = as_clustering(bp)
    if blocks.n != P.shape[0]:
        raise ICCError(f"block partition covers {blocks.n} states, matrix has {P.shape[0]}")
    labels = blocks.labels
    outside = labels[:, None] != labels[None, :]
    leak = np.where(outside, np.abs(P), 0.0).sum(axis=1)
    return 2.0 * float(leak.max())


@dataclass(frozen=True)
class Part1Config:
    """Ensemble grid and refinement settings for k estimation.

    ``reductions`` may contain ``"raw"`` to cluster the unreduced data too.
    ``ks`` defaults to 4..min(20, floor(sqrt(n))). With
    ``require_wider_gap`` a refinement that changes the estimate is only
    accepted when its Perron gap is wider than the previous one.
    """

    algorithms: tuple[str, ...] = ("kmeans", "pddp", "pddp-kmeans")
    reductions: tuple[str, ...] = ("svd", "pca", "nmf")
    ranks: tuple[int, ...] = (10,)
    ks: tuple[int, ...] | None = None
    tau: float = 0.0
    m_max: int = 20
    max_refinements: int = 3
    restarts: int = 100
    threads: int = 1
    refine_algorithms: tuple[str, ...] | None = None
    require_wider_gap: bool = True

    def k_values(self, n: int) -> tuple[int, ...]:
        if self.ks is not None:
            return tuple(int(k) for k in self.ks)
        hi = min(20, int(math.isqrt(n)))
        return tuple(range(min(4, hi), hi + 1))


class Part1Result(NamedTuple):
    k_estimate: int
    reports: list[SpectrumReport]
    consensus: ConsensusMatrix
    ensembles: list[Ensemble]


def data_inputs(X, reductions: Sequence[str], ranks: Sequence[int], seed: int = 0) -> list:
    """The (matrix, input_id) list for a data matrix under each reduction and rank.

    Reductions that do not apply (NMF of signed data, rank too large) are
    skipped with a warning.
    """
    X = as_data_matrix(X)
    inputs = []
    for method in reductions:
        if method == "raw":
            inputs.append((X, "raw"))
            continue
        for r in ranks:
            try:
                inputs.append((reduce(X, method, int(r), seed=derive_seed(seed, method, r)), f"{method}-r{r}"))
            except ICCError as exc:
                msg = f"skipped reduction {method} r={r}: {exc}"
                log.warning(msg)
                warnings.warn(msg, ICCWarning, stacklevel=2)
    if not inputs:
        raise ICCError("no usable data inputs after reduction")
    return inputs


def icc_part1(X, config: Part1Config = Part1Config(), seed: int = 0) -> Part1Result:
    """Estimate k from the Perron cluster of ensemble consensus matrices.

    The first consensus matrix comes from every algorithm on every reduced
    input for every requested k. Each refinement clusters the previous
    consensus matrix itself with the same algorithms and k values. The
    loop stops once the estimate repeats or after ``max_refinements``.
    """
    X = as_data_matrix(X)
    n = X.n
    ks = config.k_values(n)
    if not ks:
        raise ICCError("no k values to sweep")
    for k in ks:
        if k >= math.sqrt(n):
            msg = f"k={k} is not below sqrt(n)={math.sqrt(n):.1f}"
            log.warning(msg)
            warnings.warn(msg, ICCWarning, stacklevel=2)
    inputs = data_inputs(X, config.reductions, config.ranks, seed=seed)
    algos = config.algorithms
    refine_algos = config.refine_algorithms or algos

    reports, ensembles, matrices = [], [], []
    for r in range(config.max_refinements + 1):
        e = run_ensemble(inputs, algos if r == 0 else refine_algos, ks,
                         seed=derive_seed(seed, "part1", r),
                         restarts=config.restarts, threads=config.threads)
        cm = build_consensus(e)
        if config.tau > 0:
            cm = apply_intolerance(cm, config.tau)
        rep = spectrum(cm, config.m_max)
        log.info("part1 round %d: T=%d k_estimate=%d gap=%.4f", r, cm.T, rep.k_estimate, rep.gap_size)
        if r > 0 and config.require_wider_gap and rep.k_estimate != reports[-1].k_estimate \
                and rep.gap_size <= reports[-1].gap_size:
            log.info("part1 round %d narrowed the gap; keeping round %d", r, r - 1)
            break
        reports.append(rep)
        ensembles.append(e)
        matrices.append(cm)
        if r > 0 and rep.k_estimate == reports[-2].k_estimate:
            break
        inputs = [(cm, f"consensus{r}")]
    return Part1Result(reports[-1].k_estimate, reports, matrices[-1], ensembles)
