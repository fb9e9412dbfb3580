"""Iterative consensus clustering.

An ensemble of clustering algorithms, run over several low-rank views of
the data and several cluster counts, votes into a consensus matrix. The
Perron cluster of the random walk on that matrix estimates the number of
clusters, and repeated voting rounds settle on the partition a majority of
algorithms agree on.
"""
from .cluster import (
    ALGORITHMS,
    DATA_ALGORITHMS,
    GRAPH_ALGORITHMS,
    KmeansResult,
    SimilarityMatrix,
    cosine_similarity,
    ncut,
    njw,
    nmf_cluster,
    pddp,
    pddp_kmeans,
    pic,
    run_algorithm,
    spherical_kmeans,
)
from .consensus import (
    ConsensusMatrix,
    ICCWarning,
    Part2Result,
    VoteRound,
    adjacency,
    apply_intolerance,
    build_consensus,
    icc_part2,
    majority_solution,
    plurality_solution,
    run_ensemble,
)
from .data_model import (
    Clustering,
    DataMatrix,
    Ensemble,
    ICCError,
    PreconditionError,
    Provenance,
    accuracy,
    partition_from_labels,
    partitions_equal,
)
from .dimred import NmfFactors, ReducedMatrix, nmf_acls, reduce, truncated_svd
from .perron import (
    BlockPartition,
    Part1Config,
    Part1Result,
    SpectrumReport,
    TransitionView,
    data_inputs,
    deviation_from_reducibility,
    icc_part1,
    perron_gap,
    spectrum,
    transition_matrix,
)
from .synth import BlobSpec, block_labels, gaussian_blobs, noisy_block_matrix

__version__ = "0.1.0"
