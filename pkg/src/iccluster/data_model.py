"""Core dataset, partition and evaluation types.

Objects are always the rows of a :class:`DataMatrix`. Partitions are stored
in canonical form (cluster ids numbered by first appearance) so that two
equal set partitions have identical label vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment


class ICCError(ValueError):
    """Base error for invalid inputs anywhere in the package."""


class PreconditionError(ICCError):
    """An algorithm cannot be applied to the given input (e.g. NMF on signed data)."""


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An n x m matrix whose rows are the objects to cluster.

    Args:
        values: dense ndarray or scipy sparse matrix. Sparse input is stored
            in CSR form.
    """

    values: Any
    nonneg: bool = field(init=False)

    def __post_init__(self):
        vals = self.values
        if sp.issparse(vals):
            vals = sp.csr_matrix(vals, dtype=float)
            data = vals.data
        else:
            vals = np.array(vals, dtype=float)
            if vals.ndim != 2:
                raise ICCError(f"data matrix must be 2-D, got shape {vals.shape}")
            vals.setflags(write=False)
            data = vals
        n, m = vals.shape
        if n < 2 or m < 1:
            raise ICCError(f"data matrix needs n >= 2 and m >= 1, got {n}x{m}")
        if not np.all(np.isfinite(data)):
            raise ICCError("data matrix contains NaN or Inf")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "nonneg", bool(data.size == 0 or data.min() >= 0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def sparse(self) -> bool:
        return sp.issparse(self.values)

    def dense(self) -> np.ndarray:
        return self.values.toarray() if self.sparse else np.asarray(self.values)


def as_data_matrix(X) -> DataMatrix:
    return X if isinstance(X, DataMatrix) else DataMatrix(X)


@dataclass(frozen=True, eq=False)
class Clustering:
    """A partition of n objects into k non-empty clusters, canonical labels."""

    labels: np.ndarray
    k: int

    def __len__(self):
        return len(self.labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    def blocks(self) -> list[np.ndarray]:
        """Member indices of each cluster, in label order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(np.bincount(self.labels, minlength=self.k))[:-1]
        return np.split(order, bounds)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def key(self) -> bytes:
        """Hashable fingerprint; equal for equal partitions of the same n."""
        return self.labels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return self.n == other.n and partitions_equal(self, other)

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Clustering(n={self.n}, k={self.k})"


def partition_from_labels(raw_labels: Sequence[Any]) -> Clustering:
    """Canonicalize an arbitrary label vector.

    Cluster ids are renumbered 0..k-1 by order of first appearance.

    >>> partition_from_labels([2, 0, 2, 1]).labels.tolist()
    [0, 1, 0, 2]
    """
    raw = np.asarray(raw_labels)
    if raw.ndim != 1:
        raw = raw.ravel()
    if raw.size == 0:
        raise ICCError("cannot build a partition from an empty label vector")
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    # rank of each unique value's first appearance
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    labels = rank[inverse.ravel()]
    labels.setflags(write=False)
    return Clustering(labels=labels, k=len(first))


def as_clustering(c) -> Clustering:
    return c if isinstance(c, Clustering) else partition_from_labels(c)


def _check_same_n(a: Clustering, b: Clustering):
    if a.n != b.n:
        raise ICCError(f"partitions cover different numbers of objects ({a.n} vs {b.n})")


def partitions_equal(a, b) -> bool:
    """True iff a and b induce the same set partition."""
    a, b = as_clustering(a), as_clustering(b)
    _check_same_n(a, b)
    return a.k == b.k and bool(np.array_equal(a.labels, b.labels))


def confusion_matrix(pred, truth) -> np.ndarray:
    """Counts of objects in (predicted cluster, true class) pairs."""
    pred, truth = as_clustering(pred), as_clustering(truth)
    _check_same_n(pred, truth)
    C = np.zeros((pred.k, truth.k), dtype=np.int64)
    np.add.at(C, (pred.labels, truth.labels), 1)
    return C


def accuracy(pred, truth) -> float:
    """Fraction of objects correctly classified under the best cluster-to-class matching.

    Clusters are matched one-to-one with classes so as to maximize the number
    of matched objects; when the cluster counts differ, unmatched clusters
    contribute nothing.
    """
    C = confusion_matrix(pred, truth)
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum()) / float(C.sum())


@dataclass(frozen=True)
class Provenance:
    """Where one ensemble member came from."""

    algorithm: str
    input_id: str
    k_requested: int
    seed: int | None = None
    reduction: str | None = None
    rank: int | None = None


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Clusterings of a common set of n objects, with provenance."""

    clusterings: tuple[Clustering, ...]
    provenance: tuple[Provenance, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        cl = tuple(as_clustering(c) for c in self.clusterings)
        object.__setattr__(self, "clusterings", cl)
        object.__setattr__(self, "provenance", tuple(self.provenance))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if self.provenance and len(self.provenance) != len(cl):
            raise ICCError("provenance length does not match the number of clusterings")
        if cl and len({c.n for c in cl}) > 1:
            raise ICCError("ensemble members partition different numbers of objects")

    @property
    def T(self) -> int:
        return len(self.clusterings)

    @property
    def n(self) -> int:
        if not self.clusterings:
            raise ICCError("empty ensemble")
        return self.clusterings[0].n

    def __len__(self):
        return len(self.clusterings)

    def __iter__(self):
        return iter(self.clusterings)
