"""Synthetic fixtures with known structure."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import SimilarityMatrix
from .data_model import Clustering, DataMatrix, ICCError, partition_from_labels


@dataclass(frozen=True)
class BlobSpec:
    k: int = 3
    per_cluster: int | Sequence[int] = 100
    dim: int = 10
    separation: float = 12.0
    seed: int = 0

    def sizes(self) -> list[int]:
        if isinstance(self.per_cluster, (int, np.integer)):
            return [int(self.per_cluster)] * self.k
        return [int(s) for s in self.per_cluster]


def gaussian_blobs(spec: BlobSpec) -> tuple[DataMatrix, Clustering]:
    """Isotropic unit-variance Gaussian clusters with centers ``separation`` apart.

    Centers sit on the scaled coordinate axes (pairwise distance exactly
    ``separation``) and are then rotated by a random orthogonal matrix.
    Requires ``k <= dim``.
    """
    sizes = spec.sizes()
    if spec.k < 1 or len(sizes) != spec.k:
        raise ICCError("blob spec needs k >= 1 and one size per cluster")
    if min(sizes) < 2:
        raise ICCError("every blob needs at least 2 points")
    if spec.separation <= 0:
        raise ICCError("separation must be positive")
    if spec.k > spec.dim:
        raise ICCError(f"cannot place {spec.k} equidistant centers in {spec.dim} dimensions")
    rng = np.random.default_rng(spec.seed)
    centers = np.eye(spec.dim)[: spec.k] * (spec.separation / np.sqrt(2.0))
    Q, R = np.linalg.qr(rng.standard_normal((spec.dim, spec.dim)))
    Q = Q * np.sign(np.diag(R))
    centers = centers @ Q.T
    labels = np.repeat(np.arange(spec.k), sizes)
    X = centers[labels] + rng.standard_normal((len(labels), spec.dim))
    return DataMatrix(X), partition_from_labels(labels)


def noisy_block_matrix(sizes: Sequence[int], epsilon: float, seed=0) -> SimilarityMatrix:
    """All-ones diagonal blocks plus ``epsilon``-scaled uniform noise off the blocks."""
    if epsilon < 0:
        raise ICCError("epsilon must be nonnegative")
    sizes = [int(s) for s in sizes]
    labels = np.repeat(np.arange(len(sizes)), sizes)
    same = labels[:, None] == labels[None, :]
    rng = np.random.default_rng(seed)
    U = np.triu(rng.random((len(labels), len(labels))), 1)
    U = U + U.T
    S = np.where(same, 1.0, epsilon * U)
    return SimilarityMatrix(S)


def block_labels(sizes: Sequence[int]) -> Clustering:
    return partition_from_labels(np.repeat(np.arange(len(sizes)), list(sizes)))
