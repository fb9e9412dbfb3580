"""Command-line pipeline.

Subcommands::

    iccluster estimate-k DATA [options]   # k from the Perron cluster only
    iccluster cluster DATA --k K [options] # voting rounds for a known k
    iccluster run DATA [options]           # both, k estimated unless --k given
    iccluster synth OUT.csv [options]      # Gaussian-blob fixture (labeled-csv)

Settings may also come from a ``key = value`` file (``--config``); command
line flags win. ``ICC_THREADS`` sets the default worker count.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

from .cluster import ALGORITHMS, cosine_similarity, ncut
from .consensus import ICCWarning, icc_part2, round_consensus
from .data_model import ICCError, accuracy
from .dimred import METHODS
from .io import (
    FILE_SCHEMAS,
    FORMATS,
    SCHEMA_VERSION,
    block_order,
    load_matrix,
    save_matrix,
    similarity_histograms,
    write_consensus_mtx,
    write_eigenvalues_csv,
    write_heatmap_csv,
    write_histogram_csv,
    write_json,
)
from .perron import Part1Config, data_inputs, icc_part1, spectrum
from .synth import BlobSpec, gaussian_blobs

log = logging.getLogger("iccluster")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_MAJORITY = 3


def _csv_list(s):
    if isinstance(s, (list, tuple)):
        return tuple(s)
    return tuple(x.strip() for x in str(s).split(",") if x.strip())


def parse_ks(s) -> tuple[int, ...]:
    """``"4..10"``, ``"4-10"`` or ``"4,5,8"``."""
    if isinstance(s, (list, tuple)):
        return tuple(int(k) for k in s)
    s = str(s).strip()
    for sep in ("..", "-", ":"):
        if sep in s:
            lo, hi = s.split(sep, 1)
            return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in _csv_list(s))


@dataclass
class RunConfig:
    input: str = ""
    format: str = "dense-csv"
    term_document: bool = False
    algorithms: tuple[str, ...] = ("kmeans", "pddp", "pddp-kmeans")
    vote_algorithms: tuple[str, ...] = ALGORITHMS
    reductions: tuple[str, ...] = ("svd", "pca", "nmf")
    ranks: tuple[int, ...] = (10,)
    ks: tuple[int, ...] | None = None
    k: int | None = None
    tau: float = 0.0
    m_max: int = 20
    max_rounds: int = 10
    max_refinements: int = 3
    restarts: int = 100
    seed: int = 0
    threads: int = 1
    out: str = "icc-out"

    def validate(self):
        if self.format not in FORMATS:
            raise ICCError(f"format must be one of {FORMATS}")
        for a in (*self.algorithms, *self.vote_algorithms):
            if a not in ALGORITHMS:
                raise ICCError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        for r in self.reductions:
            if r not in (*METHODS, "raw"):
                raise ICCError(f"unknown reduction {r!r}")
        if not 0.0 <= self.tau <= 1.0:
            raise ICCError("tau must lie in [0, 1]")
        if self.k is not None and self.k < 2:
            raise ICCError("k must be at least 2")
        if self.m_max < 2 or self.max_rounds < 1 or self.max_refinements < 0:
            raise ICCError("m_max >= 2, max_rounds >= 1 and max_refinements >= 0 required")
        if any(r < 1 for r in self.ranks):
            raise ICCError("ranks must be positive")
        if self.ks is not None and (not self.ks or min(self.ks) < 1):
            raise ICCError("k sweep must be non-empty and positive")
        return self

    def part1(self) -> Part1Config:
        return Part1Config(
            algorithms=self.algorithms,
            reductions=self.reductions,
            ranks=self.ranks,
            ks=self.ks,
            tau=self.tau,
            m_max=self.m_max,
            max_refinements=self.max_refinements,
            restarts=self.restarts,
            threads=self.threads,
        )

    def to_json(self):
        # output location and worker count do not affect results; leaving them
        # out keeps results.json identical across reruns
        d = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()
                if k not in ("out", "threads")}


_CONVERT = {
    "algorithms": _csv_list,
    "vote_algorithms": _csv_list,
    "reductions": _csv_list,
    "ranks": lambda s: tuple(int(x) for x in _csv_list(s)),
    "ks": parse_ks,
    "k": int,
    "tau": float,
    "m_max": int,
    "max_rounds": int,
    "max_refinements": int,
    "restarts": int,
    "seed": int,
    "threads": int,
    "term_document": lambda s: s if isinstance(s, bool) else str(s).lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment. Unknown keys are rejected."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ICCError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ICCError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def make_config(values: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ICCError(f"unknown config keys: {sorted(unknown)}")
    conv = {}
    for key, value in values.items():
        if value is None:
            continue
        try:
            conv[key] = _CONVERT.get(key, str)(value)
        except ValueError as exc:
            raise ICCError(f"bad value for {key}: {value!r} ({exc})") from None
    return RunConfig(**conv).validate()


def _default_threads():
    try:
        return max(1, int(os.environ.get("ICC_THREADS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iccluster", description="Iterative consensus clustering")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def pipeline_args(sp, need_k=False):
        sp.add_argument("input", help="data file")
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--format", choices=FORMATS)
        sp.add_argument("--term-document", action="store_const", const=True, default=None,
                        help="file stores objects as columns; transpose on load")
        sp.add_argument("--algorithms", help="ensemble algorithms for k estimation (comma list)")
        sp.add_argument("--vote-algorithms", help="algorithms voting on the final partition")
        sp.add_argument("--reductions", help="comma list of svd, pca, nmf, raw")
        sp.add_argument("--ranks", help="comma list of reduction ranks")
        sp.add_argument("--ks", help="k sweep, e.g. 4..10 or 4,6,8")
        sp.add_argument("--k", type=int, required=need_k, help="known number of clusters")
        sp.add_argument("--tau", type=float, help="intolerance: minimum vote fraction kept")
        sp.add_argument("--m-max", type=int)
        sp.add_argument("--max-rounds", type=int)
        sp.add_argument("--max-refinements", type=int)
        sp.add_argument("--restarts", type=int, help="spherical k-means restarts")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--out", help="output directory")

    pipeline_args(sub.add_parser("estimate-k", help="estimate k from the Perron cluster"))
    pipeline_args(sub.add_parser("cluster", help="voting rounds for a known k"), need_k=True)
    pipeline_args(sub.add_parser("run", help="full pipeline"))

    s = sub.add_parser("synth", help="write a Gaussian blob fixture as labeled-csv")
    s.add_argument("output")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--per-cluster", type=int, default=100)
    s.add_argument("--dim", type=int, default=10)
    s.add_argument("--separation", type=float, default=12.0)
    s.add_argument("--seed", type=int, default=0)
    return p


def config_from_args(args) -> RunConfig:
    values = {"threads": _default_threads()}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return make_config(values)


def _ensemble_summary(e):
    return [
        {"algorithm": p.algorithm, "input": p.input_id, "k": p.k_requested}
        for p in e.provenance
    ]


def run_pipeline(cfg: RunConfig, mode: str = "run") -> int:
    """Execute one pipeline mode and write its artifacts into ``cfg.out``.

    Returns the process exit status.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    X, truth = load_matrix(cfg.input, cfg.format, cfg.term_document)
    caught = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always", ICCWarning)
        result = _execute(cfg, mode, X, truth, out)
        caught = [str(w.message) for w in wlist if issubclass(w.category, ICCWarning)]
    result["warnings"] = list(dict.fromkeys(caught))
    write_json(out / "results.json", result)
    if mode == "estimate-k":
        return EXIT_OK
    return EXIT_OK if result["part2"]["consensus_reached"] else EXIT_NO_MAJORITY


def run_full(cfg: RunConfig) -> int:
    """Full pipeline (k estimated unless ``cfg.k`` is set); returns the exit status."""
    return run_pipeline(cfg, "run")


def _execute(cfg, mode, X, truth, out):
    result = {
        "schema": "iccluster.results",
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "n": X.n,
        "m": X.m,
        "config": cfg.to_json(),
        "files": FILE_SCHEMAS,
        "k_estimate": None,
        "part1": None,
        "part2": None,
        "final_labels": None,
        "accuracy": None,
    }
    eig_rows = []
    final_cm = None
    k = cfg.k

    if mode == "estimate-k" or (mode == "run" and k is None):
        p1 = icc_part1(X, cfg.part1(), seed=cfg.seed)
        result["k_estimate"] = p1.k_estimate
        result["part1"] = [
            {"round": i, "T": e.T, "k_estimate": r.k_estimate, "gap_size": r.gap_size}
            for i, (r, e) in enumerate(zip(p1.reports, p1.ensembles))
        ]
        eig_rows += [("part1", i, r.eigenvalues) for i, r in enumerate(p1.reports)]
        final_cm = p1.consensus
        k = p1.k_estimate
        start = p1.consensus
    else:
        start = data_inputs(X, cfg.reductions, cfg.ranks, seed=cfg.seed)

    if mode == "estimate-k":
        order = block_order(ncut(final_cm, k, seed=cfg.seed))
    else:
        if k < 2:
            raise ICCError(f"estimated k={k}; voting needs k >= 2 (pass --k to override)")
        p2 = icc_part2(start, k, cfg.vote_algorithms, tau=cfg.tau, max_rounds=cfg.max_rounds,
                       seed=cfg.seed, restarts=cfg.restarts, threads=cfg.threads)
        result["part2"] = {
            "k": k,
            "consensus_reached": p2.reached,
            "rounds": [
                {
                    "round": r.round_index,
                    "T": r.clusterings.T,
                    "agreement_count": r.agreement_count,
                    "agreed": r.agreed is not None,
                    "votes": _ensemble_summary(r.clusterings),
                }
                for r in p2.rounds
            ],
        }
        result["final_labels"] = p2.final.labels.tolist()
        if truth is not None:
            result["accuracy"] = accuracy(p2.final, truth)
            result["round_accuracies"] = [
                [accuracy(c, truth) for c in r.clusterings] for r in p2.rounds
            ]
        final_cm = round_consensus(p2.rounds[-1], cfg.tau)
        order = block_order(p2.final)

    rep = spectrum(final_cm, cfg.m_max)
    eig_rows.append(("final", 0, rep.eigenvalues))
    result["final_spectrum"] = {"k_estimate": rep.k_estimate, "gap_size": rep.gap_size, "T": final_cm.T}
    result["block_order"] = order.tolist()

    write_eigenvalues_csv(out / "eigenvalues.csv", eig_rows)
    write_consensus_mtx(out / "consensus.mtx", final_cm)
    write_heatmap_csv(out / "heatmap.csv", final_cm, order)
    cos = None
    if X.nonneg:
        try:
            cos = cosine_similarity(X).values
        except ICCError:
            cos = None
    write_histogram_csv(out / "histogram.csv", similarity_histograms(final_cm, cos, seed=cfg.seed))
    return result


def _synth(args) -> int:
    X, truth = gaussian_blobs(BlobSpec(k=args.k, per_cluster=args.per_cluster, dim=args.dim,
                                       separation=args.separation, seed=args.seed))
    save_matrix(args.output, X, "labeled-csv", labels=truth.labels.tolist())
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = getattr(args, "out", None)
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = config_from_args(args)
        out_dir = cfg.out
        return run_pipeline(cfg, args.command)
    except (ICCError, OSError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(record), file=sys.stderr)
        if out_dir:
            try:
                Path(out_dir).mkdir(parents=True, exist_ok=True)
                write_json(Path(out_dir) / "error.json", record)
            except OSError:
                pass
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
