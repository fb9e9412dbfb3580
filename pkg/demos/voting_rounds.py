"""
Voting on a final partition
===========================

With k known, each algorithm proposes a partition. If a strict majority
agree, that partition is final. Otherwise their proposals form a new
consensus matrix and the algorithms vote again on it.
"""

from iccluster import (
    BlobSpec,
    accuracy,
    data_inputs,
    gaussian_blobs,
    icc_part2,
    run_ensemble,
)

X, truth = gaussian_blobs(BlobSpec(k=4, per_cluster=60, dim=8, separation=6, seed=1))
inputs = data_inputs(X, ["svd", "pca"], [8], seed=1)
voters = ["kmeans", "pddp", "pddp-kmeans"]

# individual algorithms, for comparison
singles = run_ensemble(inputs, voters, [4], seed=1, restarts=20)
for c, p in zip(singles, singles.provenance):
    print(f"{p.algorithm:12s} on {p.input_id}: accuracy {accuracy(c, truth):.3f}")

result = icc_part2(inputs, 4, voters, seed=1, restarts=20)
for rnd in result.rounds:
    print(f"round {rnd.round_index}: {rnd.agreement_count}/{rnd.clusterings.T} agree")
print("majority reached:", result.reached)
print("final accuracy:", accuracy(result.final, truth))
