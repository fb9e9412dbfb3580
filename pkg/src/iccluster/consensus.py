"""Consensus matrices, intolerance thresholding, ensemble execution and iterated voting."""
from __future__ import annotations

import logging
import warnings
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .cluster import ALGORITHMS, run_algorithm
from .data_model import (
    Clustering,
    Ensemble,
    ICCError,
    PreconditionError,
    Provenance,
    as_clustering,
)

log = logging.getLogger(__name__)


class ICCWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ConsensusMatrix:
    """Symmetric vote-count matrix: M[i, j] counts co-clusterings of i and j.

    ``T`` is the number of clusterings that voted; ``tau_applied`` the
    intolerance level already applied (0 when raw).
    """

    M: np.ndarray
    T: int
    tau_applied: float = 0.0

    def __post_init__(self):
        M = np.array(self.M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ICCError(f"consensus matrix must be square, got {M.shape}")
        if not np.array_equal(M, M.T):
            raise ICCError("consensus matrix is not symmetric")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    @property
    def n(self) -> int:
        return self.M.shape[0]

    def normalized(self) -> np.ndarray:
        return self.M / float(self.T)


class VoteRound(NamedTuple):
    round_index: int
    clusterings: Ensemble
    agreed: Clustering | None
    agreement_count: int


class Part2Result(NamedTuple):
    final: Clustering
    rounds: list[VoteRound]

    @property
    def reached(self) -> bool:
        return self.rounds[-1].agreed is not None


def adjacency(c) -> np.ndarray:
    """0/1 co-membership matrix of one clustering."""
    labels = as_clustering(c).labels
    return (labels[:, None] == labels[None, :]).astype(np.int64)


def build_consensus(e) -> ConsensusMatrix:
    """Sum of the adjacency matrices of every clustering in the ensemble."""
    clusterings = list(e.clusterings if isinstance(e, Ensemble) else e)
    if not clusterings:
        raise ICCError("cannot build a consensus matrix from an empty ensemble")
    clusterings = [as_clustering(c) for c in clusterings]
    n = clusterings[0].n
    if any(c.n != n for c in clusterings):
        raise ICCError("ensemble members partition different numbers of objects")
    M = np.zeros((n, n), dtype=np.int64)
    for c in clusterings:
        H = np.zeros((n, c.k), dtype=np.int64)
        H[np.arange(n), c.labels] = 1
        M += H @ H.T
    return ConsensusMatrix(M, len(clusterings), 0.0)


def apply_intolerance(cm: ConsensusMatrix, tau: float) -> ConsensusMatrix:
    """Zero the off-diagonal votes below ``tau * T``; the diagonal is kept."""
    if not 0.0 <= tau <= 1.0:
        raise ICCError(f"tau must lie in [0, 1], got {tau}")
    M = np.array(cm.M)
    drop = M < tau * cm.T
    np.fill_diagonal(drop, False)
    M[drop] = 0
    return ConsensusMatrix(M, cm.T, float(tau))


def derive_seed(seed: int, *parts) -> int:
    """Stable per-task seed from a master seed and task identifiers."""
    words = [int(seed) & 0xFFFFFFFF]
    for p in parts:
        words.append(zlib.crc32(str(p).encode()))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])


def _input_id(item, i):
    if isinstance(item, tuple) and len(item) == 2:
        return item
    return item, f"input{i}"


def run_ensemble(
    inputs: Sequence,
    algos: Sequence[str],
    ks: Sequence[int],
    seed: int = 0,
    restarts: int = 100,
    threads: int = 1,
) -> Ensemble:
    """Cluster every (input, algorithm, k) triple.

    ``inputs`` is a list of ``(matrix, input_id)`` pairs; a matrix may be a
    DataMatrix, ReducedMatrix, ConsensusMatrix, SimilarityMatrix or array.
    Triples whose algorithm cannot run on that input (e.g. NMF on signed
    data) are skipped with a warning; it is an error only if every triple is
    skipped. Results are ordered input-major, then algorithm, then k.
    """
    inputs = [_input_id(item, i) for i, item in enumerate(inputs)]
    if not inputs or not algos or not ks:
        raise ICCError("run_ensemble needs non-empty inputs, algorithms and k values")
    for a in algos:
        if a not in ALGORITHMS:
            raise ICCError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
    tasks = []
    for X, input_id in inputs:
        n = X.n if hasattr(X, "n") else np.shape(X)[0]
        for a in algos:
            for k in ks:
                if k > n:
                    raise ICCError(f"k={k} exceeds the number of objects {n}")
                tasks.append((X, input_id, a, int(k), derive_seed(seed, input_id, a, k)))

    def work(task):
        X, input_id, a, k, s = task
        try:
            return run_algorithm(a, X, k, seed=s, restarts=restarts), None
        except PreconditionError as exc:
            return None, f"skipped {a} on {input_id} with k={k}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    clusterings, prov, notes = [], [], []
    for (X, input_id, a, k, s), (c, note) in zip(tasks, results):
        if c is None:
            notes.append(note)
            continue
        clusterings.append(c)
        prov.append(
            Provenance(
                algorithm=a,
                input_id=input_id,
                k_requested=k,
                seed=s,
                reduction=getattr(X, "method", None),
                rank=getattr(X, "rank", None),
            )
        )
    for note in dict.fromkeys(notes):
        log.warning(note)
        warnings.warn(note, ICCWarning, stacklevel=2)
    if not clusterings:
        raise ICCError("every (input, algorithm, k) triple was skipped: " + "; ".join(notes))
    return Ensemble(tuple(clusterings), tuple(prov), tuple(notes))


def _groups(e):
    counts = Counter()
    first = {}
    for c in e.clusterings:
        counts[c.key()] += 1
        first.setdefault(c.key(), c)
    # Counter preserves first-seen order, so max() breaks ties by earliest member
    key = max(counts, key=counts.__getitem__)
    return first[key], counts[key]


def plurality_solution(e) -> tuple[Clustering, int]:
    """Most common partition in the ensemble and its count."""
    if not len(e):
        raise ICCError("empty ensemble")
    return _groups(e)


def majority_solution(e) -> tuple[Clustering, int] | None:
    """The partition shared by a strict majority of the ensemble, if any."""
    c, count = plurality_solution(e)
    if 2 * count > len(e):
        return c, count
    return None


def icc_part2(
    start,
    k: int,
    algos: Sequence[str],
    tau: float = 0.0,
    max_rounds: int = 10,
    seed: int = 0,
    restarts: int = 100,
    threads: int = 1,
) -> Part2Result:
    """Iterated voting until a strict majority of algorithms agree.

    ``start`` is a ConsensusMatrix, or, when k is known in advance, a list of
    ``(matrix, input_id)`` data inputs. Each round clusters the current input
    into k clusters with every algorithm; without a majority the round's
    clusterings are collected into a fresh consensus matrix (thresholded at
    ``tau``) that becomes the next round's input. If ``max_rounds`` pass
    without agreement the plurality partition is returned and the last round
    has ``agreed`` set to None.
    """
    if k < 2:
        raise ICCError("icc_part2 needs k >= 2")
    if max_rounds < 1:
        raise ICCError("max_rounds must be at least 1")
    algos = list(algos)
    if not algos:
        raise ICCError("no algorithms given")
    if isinstance(start, ConsensusMatrix):
        inputs = [(start, "consensus0")]
    elif isinstance(start, list):
        inputs = start
    else:
        inputs = [(start, "data")]

    rounds: list[VoteRound] = []
    for r in range(1, max_rounds + 1):
        e = run_ensemble(inputs, algos, [k], seed=derive_seed(seed, "round", r),
                         restarts=restarts, threads=threads)
        found = majority_solution(e)
        if found is not None:
            rounds.append(VoteRound(r, e, found[0], found[1]))
            return Part2Result(found[0], rounds)
        _, count = plurality_solution(e)
        rounds.append(VoteRound(r, e, None, count))
        cm = apply_intolerance(build_consensus(e), tau)
        inputs = [(cm, f"consensus{r}")]
    best, _ = plurality_solution(rounds[-1].clusterings)
    return Part2Result(best, rounds)


def round_consensus(rnd: VoteRound, tau: float = 0.0) -> ConsensusMatrix:
    """Consensus matrix built from one round's votes."""
    return apply_intolerance(build_consensus(rnd.clusterings), tau)


__all__ = [
    "ConsensusMatrix",
    "VoteRound",
    "Part2Result",
    "ICCWarning",
    "adjacency",
    "build_consensus",
    "apply_intolerance",
    "run_ensemble",
    "majority_solution",
    "plurality_solution",
    "icc_part2",
    "round_consensus",
    "derive_seed",
]
