"""
Estimating k from an ensemble
=============================

Three well separated Gaussian blobs are clustered by several algorithms on
two reduced views of the data, for every k from 4 to 10. None of the runs
uses the right k, yet the consensus of their votes has exactly three
eigenvalues near 1.
"""

import numpy as np
from iccluster import BlobSpec, Part1Config, gaussian_blobs, icc_part1

X, truth = gaussian_blobs(BlobSpec(k=3, per_cluster=100, dim=10, separation=10, seed=0))

config = Part1Config(reductions=("svd", "pca"), ranks=(10,), ks=tuple(range(4, 11)), restarts=20)
result = icc_part1(X, config, seed=0)

for i, rep in enumerate(result.reports):
    print(f"round {i}: T={result.ensembles[i].T} k={rep.k_estimate} gap={rep.gap_size:.3f}")
    print("  leading eigenvalues", np.round(rep.eigenvalues[:6], 3))

# fraction of runs that put each pair of points together
print("mean vote within blobs:", end=" ")
M = result.consensus.normalized()
same = truth.labels[:, None] == truth.labels[None, :]
print(f"{M[same].mean():.3f}, across blobs: {M[~same].mean():.3f}")
