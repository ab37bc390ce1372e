"""File formats: sparse ``label index:value`` text, results CSV, configs.

Sparse text format (one sample per line)::

    <label> <index>:<value> <index>:<value> ...

Indices are 1-based and strictly increasing within a line; fields are
separated by whitespace; ``#`` starts a comment.  Labels in {-1, +1} or
{0, 1} are mapped to {0, 1}; any other labels are kept as real responses.

Results CSV: comma separated with the header of :meth:`EvalRecord.columns`;
floats are written with 17 significant digits so they read back exactly;
``car`` is empty when not applicable; ``error`` is empty on success.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from .config import ExperimentSpec, read_config  # noqa: F401  (re-exported)
from .linalg import normalize_columns
from .metrics import EvalRecord

log = logging.getLogger(__name__)


class DataFormatError(ValueError):
    pass


@dataclass
class SparseTextDataset:
    X: np.ndarray  # column-normalized; all-zero columns stay zero
    y: np.ndarray
    eligible: np.ndarray  # False for all-zero columns
    scale: np.ndarray
    dropped_rows: List[int] = field(default_factory=list)  # 1-based line numbers of vacant rows
    binary: bool = True

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def metadata(self) -> dict:
        return {"n": self.n, "p": self.p, "dropped_vacant_rows": len(self.dropped_rows),
                "excluded_zero_columns": int(np.count_nonzero(~self.eligible)),
                "vacant_row_policy": "rows without features are dropped"}


def parse_sparse_text(lines: Iterable[str], source: str = "<input>"):
    """Parse lines into ``(labels, rows, dropped)``; ``rows`` holds (indices, values)."""
    labels: List[float] = []
    rows = []
    dropped: List[int] = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise DataFormatError(f"{source}:{lineno}: bad label {parts[0]!r}") from None
        idx, val = [], []
        for tok in parts[1:]:
            i, sep, v = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                i, v = int(i), float(v)
            except ValueError:
                raise DataFormatError(f"{source}:{lineno}: malformed feature {tok!r}") from None
            if i < 1:
                raise DataFormatError(f"{source}:{lineno}: feature index {i} is not 1-based")
            if idx and i <= idx[-1]:
                raise DataFormatError(f"{source}:{lineno}: feature indices must increase ({idx[-1]} then {i})")
            if not math.isfinite(v):
                raise DataFormatError(f"{source}:{lineno}: non-finite value {tok!r}")
            idx.append(i)
            val.append(v)
        if not idx:
            dropped.append(lineno)
            continue
        labels.append(label)
        rows.append((idx, val))
    return labels, rows, dropped


def _map_labels(labels: np.ndarray):
    values = set(np.unique(labels).tolist())
    if values <= {-1.0, 1.0}:
        return (labels > 0).astype(float), True
    if values <= {0.0, 1.0}:
        return labels.astype(float), True
    return labels.astype(float), False


def read_sparse_text(path, p: Optional[int] = None, normalize: bool = True) -> SparseTextDataset:
    """Read a sparse text file into a dense, column-normalized design.

    Rows with no features are dropped.  ``p`` defaults to the largest index
    seen.  Columns that end up all zero stay zero and are marked ineligible
    for selection.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        labels, rows, dropped = parse_sparse_text(fh, str(path))
    if not rows:
        raise DataFormatError(f"{path}: no rows with features")
    p_seen = max(r[0][-1] for r in rows)
    p = p_seen if p is None else p
    if p < p_seen:
        raise DataFormatError(f"{path}: feature index {p_seen} exceeds p={p}")
    X = np.zeros((len(rows), p), order="F")
    for i, (idx, val) in enumerate(rows):
        X[i, np.asarray(idx) - 1] = val
    y, binary = _map_labels(np.asarray(labels))
    if dropped:
        log.info("%s: dropped %d vacant rows", path, len(dropped))
    if normalize:
        Xn, scale = normalize_columns(X, allow_zero=True)
    else:
        Xn, scale = X, np.ones(p)
    eligible = np.linalg.norm(X, axis=0) > 0
    return SparseTextDataset(Xn, y, eligible, scale, dropped, binary)


def write_sparse_text(path, X, y) -> None:
    """Write rows as ``label index:value`` with 17 significant digits."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    with Path(path).open("w", encoding="utf-8") as fh:
        for i in range(X.shape[0]):
            nz = np.flatnonzero(X[i])
            feats = " ".join(f"{j + 1}:{X[i, j]:.17g}" for j in nz)
            fh.write(f"{y[i]:.17g} {feats}".rstrip() + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_results_csv(records: Iterable[EvalRecord], path) -> None:
    cols = EvalRecord.columns()
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


_INT_COLS = {"seed", "rep", "n", "p", "K", "T", "iters"}
_STR_COLS = {"method", "error"}


def read_results_csv(path) -> List[EvalRecord]:
    cols = EvalRecord.columns()
    out = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != cols:
            raise DataFormatError(f"{path}: unexpected header {header}")
        for row in reader:
            kw = {}
            for c, v in zip(cols, row):
                if c in _STR_COLS:
                    kw[c] = v
                elif c in _INT_COLS:
                    kw[c] = int(v)
                elif c == "car":
                    kw[c] = float(v) if v != "" else None
                else:
                    kw[c] = float(v)
            out.append(EvalRecord(**kw))
    return out
