import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag

from iccluster import (
    ALGORITHMS,
    BlobSpec,
    ICCError,
    PreconditionError,
    SimilarityMatrix,
    accuracy,
    gaussian_blobs,
    ncut,
    njw,
    nmf_cluster,
    partition_from_labels,
    partitions_equal,
    pddp,
    pddp_kmeans,
    pic,
    run_algorithm,
    spherical_kmeans,
)
from iccluster.cluster import euclidean_kmeans, spherical_objective


def blocks(*sizes):
    return block_diag(*[np.ones((s, s)) for s in sizes])


def block_truth(*sizes):
    return partition_from_labels(np.repeat(np.arange(len(sizes)), sizes))


def two_blobs(seed=0, n=20):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal([10, 0, 0], 0.3, (n, 3)), rng.normal([0, 10, 0], 0.3, (n, 3))])
    return X, block_truth(n, n)


def test_spherical_kmeans_antipodal_bundles():
    rng = np.random.default_rng(1)
    d = rng.standard_normal(5)
    d /= np.linalg.norm(d)
    X = np.vstack([d + 0.01 * rng.standard_normal((15, 5)), -d + 0.01 * rng.standard_normal((15, 5))])
    res = spherical_kmeans(X, 2, restarts=5, seed=0)
    assert accuracy(res.clustering, block_truth(15, 15)) == 1.0


def test_spherical_kmeans_single_cluster_objective():
    X = np.random.default_rng(2).random((10, 4)) + 0.1
    res = spherical_kmeans(X, 1, restarts=3)
    Y = X / np.linalg.norm(X, axis=1, keepdims=True)
    c = Y.mean(axis=0)
    c /= np.linalg.norm(c)
    assert res.clustering.k == 1
    assert res.objective == pytest.approx(np.sum((Y - c) ** 2), rel=1e-10)


def test_spherical_kmeans_deterministic_and_monotone():
    X, _ = gaussian_blobs(BlobSpec(k=3, per_cluster=20, dim=5, separation=3, seed=3))
    a = spherical_kmeans(X, 4, restarts=10, seed=7)
    b = spherical_kmeans(X, 4, restarts=10, seed=7)
    assert np.array_equal(a.clustering.labels, b.clustering.labels) and a.objective == b.objective
    tr = np.array(a.objective_trace)
    assert np.all(np.diff(tr) <= 1e-9)
    assert a.clustering.k == 4 and a.objective >= 0


def test_spherical_kmeans_errors():
    with pytest.raises(ICCError):
        spherical_kmeans(np.ones((3, 2)), 4)
    with pytest.raises(PreconditionError):
        spherical_kmeans(np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]]), 2)


def test_spherical_kmeans_sparse_matches_dense():
    A = sp.random(30, 12, density=0.5, random_state=4, format="csr") + sp.eye(30, 12)
    a = spherical_kmeans(A, 3, restarts=5, seed=1)
    b = spherical_kmeans(A.toarray(), 3, restarts=5, seed=1)
    assert partitions_equal(a.clustering, b.clustering)


def test_pddp_two_blobs_and_trivial():
    X, truth = two_blobs()
    assert partitions_equal(pddp(X, 2), truth)
    assert pddp(X, 1).k == 1
    with pytest.raises(ICCError):
        pddp(X, 41)


def test_pddp_identical_points_split_at_median():
    c = pddp(np.ones((5, 3)), 2)
    assert c.labels.tolist() == [0, 0, 1, 1, 1]


def test_pddp_reaches_n_leaves():
    X = np.random.default_rng(5).standard_normal((7, 2))
    assert pddp(X, 7).k == 7


def test_pddp_deterministic_and_permutation_equivariant():
    X, _ = gaussian_blobs(BlobSpec(k=3, per_cluster=15, dim=4, separation=4, seed=6))
    X = X.values
    a, b = pddp(X, 5), pddp(X, 5)
    assert np.array_equal(a.labels, b.labels)
    perm = np.random.default_rng(0).permutation(len(X))
    c = pddp(X[perm], 5)
    back = np.empty_like(c.labels)
    back[perm] = c.labels
    assert partitions_equal(a, back)


def test_pddp_sparse_matches_dense():
    A = sp.random(25, 10, density=0.4, random_state=7, format="csr")
    assert partitions_equal(pddp(A, 4), pddp(A.toarray(), 4))


def test_pddp_kmeans_fixed_point_and_descent():
    X, truth = two_blobs(1)
    res = pddp_kmeans(X, 2)
    assert partitions_equal(res.clustering, pddp(X, 2))
    X2, _ = gaussian_blobs(BlobSpec(k=3, per_cluster=20, dim=4, separation=2, seed=8))
    res2 = pddp_kmeans(X2, 4)
    assert res2.objective <= spherical_objective(X2, pddp(X2, 4)) + 1e-9


def test_nmf_cluster_blocks():
    X = blocks(2, 2)
    assert partitions_equal(nmf_cluster(X, 2, seed=0), block_truth(2, 2))
    assert nmf_cluster(X, 1).k == 1
    with pytest.raises(PreconditionError):
        nmf_cluster(-X, 2)


def test_nmf_cluster_returns_k_nonempty():
    X = np.random.default_rng(9).random((20, 6))
    for k in (2, 3, 5):
        assert nmf_cluster(X, k, seed=1).k == k


@pytest.mark.parametrize("seed", range(3))
def test_pic_two_blocks(seed):
    assert partitions_equal(pic(blocks(3, 3), 2, seed=seed), block_truth(3, 3))
    assert pic(blocks(3, 3), 1).k == 1


def test_ncut_three_blocks():
    assert partitions_equal(ncut(blocks(4, 4, 4), 3, seed=0), block_truth(4, 4, 4))
    assert ncut(blocks(4, 4), 1).k == 1


def test_njw_two_blocks():
    assert partitions_equal(njw(blocks(4, 4), 2, seed=0), block_truth(4, 4))
    assert njw(blocks(4, 4), 1).k == 1


@pytest.mark.parametrize("fn", [pic, ncut, njw])
def test_graph_algorithms_reject_zero_degree(fn):
    S = blocks(2, 2)
    S[3, :] = 0.0
    S[:, 3] = 0.0
    with pytest.raises(PreconditionError):
        fn(S, 2)


def test_similarity_matrix_validation():
    with pytest.raises(ICCError):
        SimilarityMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(ICCError):
        SimilarityMatrix(np.array([[1.0, -0.5], [-0.5, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(2, 6), min_size=2, max_size=5), st.integers(0, 2**16))
def test_graph_algorithms_recover_exact_blocks(sizes, seed):
    rng = np.random.default_rng(seed)
    S = blocks(*sizes)
    perm = rng.permutation(len(S))
    S = S[np.ix_(perm, perm)]
    truth = block_truth(*sizes).labels[perm]
    for fn in (pic, ncut, njw):
        c = fn(S, len(sizes), seed=seed)
        assert c.k == len(sizes)
        assert partitions_equal(c, truth), fn.__name__


def test_euclidean_kmeans_keeps_k_with_duplicates():
    labels = euclidean_kmeans(np.zeros(6), 3, seed=0)
    assert len(set(labels.tolist())) == 3


@pytest.mark.parametrize("name", ALGORITHMS)
def test_every_algorithm_returns_requested_k(name):
    X, _ = gaussian_blobs(BlobSpec(k=3, per_cluster=10, dim=5, separation=8, seed=10))
    A = np.abs(X.values)
    for k in (2, 3, 4):
        assert run_algorithm(name, A, k, seed=1, restarts=5).k == k


def test_graph_algorithm_on_signed_data_is_precondition_error():
    with pytest.raises(PreconditionError):
        run_algorithm("ncut", np.array([[1.0, -1.0], [2.0, 1.0], [0.5, 0.5]]), 2)


def test_unknown_algorithm():
    with pytest.raises(ICCError):
        run_algorithm("dbscan", np.eye(3), 2)
