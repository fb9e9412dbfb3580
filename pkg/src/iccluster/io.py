"""Reading and writing matrices, labels and pipeline artifacts."""
from __future__ import annotations

import csv
import io as _io
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .data_model import Clustering, DataMatrix, ICCError, partition_from_labels

FORMATS = ("dense-csv", "labeled-csv", "matrix-market")
SCHEMA_VERSION = 1


class ParseError(ICCError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path = str(path)
        self.line = line


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _read_csv(path, labeled: bool):
    rows, labels, width = [], [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and not all(_is_number(c) for c in (cells[:-1] if labeled else cells)):
                continue  # header
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(path, lineno, f"ragged row: expected {width} fields, got {len(cells)}")
            values = cells[:-1] if labeled else cells
            try:
                rows.append([float(c) for c in values])
            except ValueError:
                bad = next(c for c in values if not _is_number(c))
                raise ParseError(path, lineno, f"non-numeric cell {bad!r}") from None
            if labeled:
                labels.append(cells[-1])
    if not rows:
        raise ParseError(path, 0, "no data rows")
    if labeled and width < 2:
        raise ParseError(path, 1, "labeled-csv needs at least one feature column plus the label")
    return np.array(rows, dtype=float), labels


def _parse_label(s):
    try:
        return int(s)
    except ValueError:
        return s


def load_matrix(path, format: str = "dense-csv", term_document: bool = False):
    """Load a data matrix and, for labeled-csv, its ground-truth partition.

    Returns:
        (DataMatrix, Clustering or None)
    """
    path = Path(path)
    if format not in FORMATS:
        raise ICCError(f"unknown format {format!r}; expected one of {FORMATS}")
    if not path.exists():
        raise ICCError(f"{path}: no such file")
    truth = None
    if format == "matrix-market":
        try:
            A = scipy.io.mmread(str(path))
        except (ValueError, OSError, IndexError) as exc:
            raise ParseError(path, 0, f"invalid Matrix Market file: {exc}") from None
        A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
        if term_document:
            A = A.T.tocsr() if sp.issparse(A) else A.T
    else:
        A, labels = _read_csv(path, labeled=format == "labeled-csv")
        if term_document:
            A = A.T
        if format == "labeled-csv":
            if term_document:
                raise ICCError("labeled-csv rows are objects; term_document does not apply")
            truth = partition_from_labels([_parse_label(s) for s in labels])
    return DataMatrix(A), truth


def save_matrix(path, X, format: str = "dense-csv", labels=None):
    """Write X so that :func:`load_matrix` reads back bit-identical values."""
    path = Path(path)
    A = X.values if isinstance(X, DataMatrix) else X
    if format == "matrix-market":
        buf = _io.BytesIO()
        scipy.io.mmwrite(buf, sp.coo_matrix(A) if sp.issparse(A) else np.asarray(A), precision=17)
        path.write_bytes(buf.getvalue())
        return
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for i, row in enumerate(A):
            cells = [repr(float(v)) for v in row]
            if format == "labeled-csv":
                cells.append(str(labels[i]))
            w.writerow(cells)


def write_consensus_mtx(path, cm):
    """Consensus matrix as integer coordinate Matrix Market (nonzeros only)."""
    M = sp.coo_matrix(np.asarray(cm.M, dtype=np.int64))
    buf = _io.BytesIO()
    scipy.io.mmwrite(buf, M, comment=f" consensus matrix; T={cm.T}; tau={cm.tau_applied!r}",
                     field="integer", symmetry="symmetric")
    Path(path).write_bytes(buf.getvalue())


def read_consensus_mtx(path) -> np.ndarray:
    return np.asarray(scipy.io.mmread(str(path)).toarray(), dtype=np.int64)


def write_eigenvalues_csv(path, rows):
    """rows: iterable of (stage, round, eigenvalues)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "round", "index", "eigenvalue"])
        for stage, rnd, lam in rows:
            for i, v in enumerate(lam, start=1):
                w.writerow([stage, rnd, i, repr(float(v))])


def block_order(clustering: Clustering) -> np.ndarray:
    return np.argsort(clustering.labels, kind="stable")


def write_heatmap_csv(path, cm, order):
    """Nonzero entries of the consensus matrix with rows/columns permuted by ``order``."""
    M = np.asarray(cm.M)[np.ix_(order, order)]
    r, c = np.nonzero(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for i, j in zip(r.tolist(), c.tolist()):
            w.writerow([i, j, int(M[i, j])])


def _upper_sample(n, max_pairs, rng):
    total = n * (n - 1) // 2
    iu = np.triu_indices(n, 1)
    if total <= max_pairs:
        return iu
    pick = np.sort(rng.choice(total, size=max_pairs, replace=False))
    return iu[0][pick], iu[1][pick]


def similarity_histograms(cm, cosine=None, bins: int = 20, max_pairs: int = 1_000_000, seed=0):
    """Histogram rows (source, bin_left, bin_right, count) over off-diagonal pairs.

    Consensus values are the vote fractions M/T on [0, 1]; cosine values, if
    given, are binned on [-1, 1]. Above ``max_pairs`` pairs a seeded random
    subset of pairs (the same for both sources) is used.
    """
    rng = np.random.default_rng(seed)
    i, j = _upper_sample(cm.n, max_pairs, rng)
    out = []
    sources = [("consensus", np.asarray(cm.M)[i, j] / float(cm.T), (0.0, 1.0))]
    if cosine is not None:
        sources.append(("cosine", np.asarray(cosine)[i, j], (-1.0, 1.0)))
    for name, vals, rng_ in sources:
        counts, edges = np.histogram(vals, bins=bins, range=rng_)
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            out.append((name, float(lo), float(hi), int(c)))
    return out


def write_histogram_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["source", "bin_left", "bin_right", "count"])
        for name, lo, hi, c in rows:
            w.writerow([name, repr(lo), repr(hi), c])


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


FILE_SCHEMAS = {
    "results.json": {"version": SCHEMA_VERSION, "format": "json"},
    "eigenvalues.csv": {"version": SCHEMA_VERSION, "columns": ["stage", "round", "index", "eigenvalue"]},
    "consensus.mtx": {"version": SCHEMA_VERSION, "format": "matrix-market coordinate integer symmetric"},
    "heatmap.csv": {
        "version": SCHEMA_VERSION,
        "columns": ["row", "col", "value"],
        "note": "nonzero entries of M with objects reordered by results.json block_order",
    },
    "histogram.csv": {"version": SCHEMA_VERSION, "columns": ["source", "bin_left", "bin_right", "count"]},
}
