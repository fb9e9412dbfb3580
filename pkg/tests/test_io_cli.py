import json

import numpy as np
import pytest
import scipy.sparse as sp

from iccluster import ICCError
from iccluster.cli import RunConfig, main, make_config, parse_ks, read_config_file, run_full
from iccluster.io import (
    ParseError,
    load_matrix,
    read_consensus_mtx,
    save_matrix,
    similarity_histograms,
    write_consensus_mtx,
)
from iccluster.consensus import ConsensusMatrix


def test_load_dense_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n3,4.5\n0,-1\n")
    X, truth = load_matrix(p)
    assert X.dense().tolist() == [[1, 2], [3, 4.5], [0, -1]] and truth is None
    X, _ = load_matrix(p, term_document=True)
    assert X.shape == (2, 3)


def test_load_labeled_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2,cat\n3,4,dog\n5,6,cat\n")
    X, truth = load_matrix(p, "labeled-csv")
    assert X.shape == (3, 2) and truth.labels.tolist() == [0, 1, 0]


@pytest.mark.parametrize("body,line", [("1,2\n3\n", 2), ("1,2\n3,4\nx,5\n", 3)])
def test_parse_errors_report_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(ParseError) as exc:
        load_matrix(p)
    assert exc.value.line == line and f":{line}:" in str(exc.value)


def test_missing_file_and_bad_format(tmp_path):
    with pytest.raises(ICCError):
        load_matrix(tmp_path / "nope.csv")
    with pytest.raises(ICCError):
        load_matrix(tmp_path / "nope.csv", format="xlsx")


def test_csv_round_trip_bit_exact(tmp_path, rng):
    A = rng.standard_normal((6, 4)) * 10.0 ** rng.integers(-20, 20, (6, 4))
    save_matrix(tmp_path / "a.csv", A)
    assert np.array_equal(load_matrix(tmp_path / "a.csv")[0].values, A)


def test_matrix_market_round_trip(tmp_path, rng):
    A = sp.random(8, 5, density=0.4, random_state=1, format="csr")
    save_matrix(tmp_path / "a.mtx", A, "matrix-market")
    X, _ = load_matrix(tmp_path / "a.mtx", "matrix-market")
    assert X.sparse and np.array_equal(X.dense(), A.toarray())
    Xt, _ = load_matrix(tmp_path / "a.mtx", "matrix-market", term_document=True)
    assert Xt.shape == (5, 8)


def test_consensus_mtx_round_trip(tmp_path):
    M = np.array([[3, 1, 0], [1, 3, 2], [0, 2, 3]])
    write_consensus_mtx(tmp_path / "c.mtx", ConsensusMatrix(M, 3))
    assert np.array_equal(read_consensus_mtx(tmp_path / "c.mtx"), M)


def test_histograms_count_all_pairs():
    M = np.array([[2, 2, 0], [2, 2, 1], [0, 1, 2]])
    rows = similarity_histograms(ConsensusMatrix(M, 2), bins=4)
    counts = [c for _, _, _, c in rows]
    assert sum(counts) == 3 and counts == [1, 0, 1, 1]


def test_parse_ks():
    assert parse_ks("4..6") == (4, 5, 6)
    assert parse_ks("4-6") == (4, 5, 6)
    assert parse_ks("3,8") == (3, 8)


def test_config_file(tmp_path):
    p = tmp_path / "icc.conf"
    p.write_text("# settings\nks = 4..6\ntau = 0.3\nreductions = svd,pca\n")
    cfg = make_config(read_config_file(p))
    assert cfg.ks == (4, 5, 6) and cfg.tau == 0.3 and cfg.reductions == ("svd", "pca")
    p.write_text("colour = blue\n")
    with pytest.raises(ICCError):
        read_config_file(p)
    with pytest.raises(ICCError):
        make_config({"tau": "2"})
    with pytest.raises(ICCError):
        make_config({"algorithms": "kmeans,magic"})


@pytest.fixture(scope="module")
def blobs_csv(tmp_path_factory):
    p = tmp_path_factory.mktemp("data") / "blobs.csv"
    assert main(["synth", str(p), "--per-cluster", "30", "--dim", "6", "--seed", "1"]) == 0
    return p


FAST = ["--format", "labeled-csv", "--reductions", "svd,pca", "--ranks", "5", "--ks", "4..6",
        "--restarts", "5", "--vote-algorithms", "kmeans,pddp,pddp-kmeans"]


def test_cli_run_writes_artifacts(blobs_csv, tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(blobs_csv), *FAST, "--out", str(out)]) == 0
    for name in ("results.json", "eigenvalues.csv", "consensus.mtx", "heatmap.csv", "histogram.csv"):
        assert (out / name).exists()
    res = json.loads((out / "results.json").read_text())
    assert res["k_estimate"] == 3 and res["accuracy"] == 1.0
    assert res["part2"]["consensus_reached"]
    assert sorted(res["block_order"]) == list(range(90))
    assert (out / "eigenvalues.csv").read_text().startswith("stage,round,index,eigenvalue\n")


def test_cli_cluster_and_estimate(blobs_csv, tmp_path):
    assert main(["cluster", str(blobs_csv), *FAST, "--k", "3", "--out", str(tmp_path / "c")]) == 0
    res = json.loads((tmp_path / "c" / "results.json").read_text())
    assert res["k_estimate"] is None and res["part2"]["k"] == 3
    assert main(["estimate-k", str(blobs_csv), *FAST, "--out", str(tmp_path / "e")]) == 0
    res = json.loads((tmp_path / "e" / "results.json").read_text())
    assert res["k_estimate"] == 3 and res["part2"] is None


def test_cli_error_exit(tmp_path, capsys):
    code = main(["run", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")])
    assert code == 1
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["error"] == "ICCError"
    assert (tmp_path / "o" / "error.json").exists()


def test_cli_no_majority_exit(tmp_path):
    # a single uniform blob voted at k=4: algorithms split it differently
    p = tmp_path / "blob.csv"
    main(["synth", str(p), "--k", "1", "--per-cluster", "80", "--dim", "6", "--seed", "2"])
    code = main(["cluster", str(p), "--format", "labeled-csv", "--reductions", "svd", "--ranks", "6",
                 "--k", "4", "--restarts", "3", "--max-rounds", "1", "--out", str(tmp_path / "o")])
    res = json.loads((tmp_path / "o" / "results.json").read_text())
    assert code == 3 and not res["part2"]["consensus_reached"]
    assert len(res["final_labels"]) == 80


def test_run_full_byte_identical(blobs_csv, tmp_path):
    def once(d):
        cfg = make_config({"input": str(blobs_csv), "format": "labeled-csv", "reductions": "svd",
                           "ranks": "5", "ks": "4..5", "restarts": "3", "seed": "11",
                           "vote_algorithms": "kmeans,pddp,ncut", "out": str(d)})
        assert run_full(cfg) == 0
        return [(d / f).read_bytes() for f in ("results.json", "eigenvalues.csv", "consensus.mtx")]

    assert once(tmp_path / "a") == once(tmp_path / "b")
