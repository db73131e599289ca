"""Datasets and file loaders (header-free CSV and svmlight)."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """Labeled sample S (size m) plus unlabeled sample U (size u >= m).

    When no unlabeled sample is supplied, U defaults to the points of S
    (the S = U comparison mode).
    """

    X: np.ndarray
    y: np.ndarray
    U: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise DataError("labeled sample must be (m, d) points with m labels")
        if not np.isfinite(X).all():
            raise DataError("labeled points contain non-finite values")
        if y.size == 0:
            raise DataError("empty labeled sample")
        if not np.all(np.abs(y) == 1.0):
            raise DataError("labels must lie in {-1, +1}")
        U = self.U
        U = X.copy() if U is None else np.asarray(U, dtype=float)
        if U.ndim != 2 or U.shape[1] != X.shape[1]:
            raise DataError("unlabeled sample dimension does not match the labeled sample")
        if not np.isfinite(U).all():
            raise DataError("unlabeled points contain non-finite values")
        if U.shape[0] < X.shape[0]:
            raise DataError("unlabeled sample must be at least as large as the labeled one")
        X.setflags(write=False)
        U.setflags(write=False)
        y = y.astype(int)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "U", U)

    @property
    def m(self):
        return self.X.shape[0]

    @property
    def u(self):
        return self.U.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


def _parse_label(tok, path, lineno):
    try:
        v = float(tok)
    except ValueError:
        raise DataError(f"{path}:{lineno}: cannot parse label {tok!r}") from None
    if v not in (-1.0, 1.0):
        raise DataError(f"{path}:{lineno}: label {tok!r} outside {{-1, +1}}")
    return int(v)


def load_points_csv(path, labeled):
    """Header-free CSV rows ``label,f1,...,fd`` (label column omitted when unlabeled)."""
    labels, rows, width = [], [], None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if labeled:
                if len(toks) < 2:
                    raise DataError(f"{path}:{lineno}: expected a label and at least one feature")
                labels.append(_parse_label(toks[0], path, lineno))
                toks = toks[1:]
            try:
                row = [float(t) for t in toks]
            except ValueError:
                raise DataError(f"{path}:{lineno}: cannot parse feature value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(f"{path}:{lineno}: inconsistent dimension ({len(row)} vs {width})")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=float)
    if not np.isfinite(X).all():
        raise DataError(f"{path}: non-finite feature values")
    return (X, np.asarray(labels)) if labeled else (X, None)


def load_points_svmlight(path, labeled, d=None):
    """Svmlight rows ``label idx:val ...`` with 1-based indices.

    Unlabeled files drop the label token, in which case every line starts
    directly with ``idx:val`` pairs.
    """
    labels, entries, max_idx = [], [], 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if labeled:
                if ":" in toks[0]:
                    raise DataError(f"{path}:{lineno}: missing label token")
                labels.append(_parse_label(toks[0], path, lineno))
                toks = toks[1:]
            row = {}
            for tok in toks:
                try:
                    idx_s, val_s = tok.split(":")
                    idx, val = int(idx_s), float(val_s)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: malformed entry {tok!r}") from None
                if idx < 1:
                    raise DataError(f"{path}:{lineno}: svmlight indices are 1-based")
                row[idx - 1] = val
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not entries:
        raise DataError(f"{path}: no data rows")
    dim = d if d is not None else max_idx
    if max_idx > dim:
        raise DataError(f"{path}: index {max_idx} exceeds declared dimension {dim}")
    X = np.zeros((len(entries), dim))
    for i, row in enumerate(entries):
        for j, v in row.items():
            X[i, j] = v
    if not np.isfinite(X).all():
        raise DataError(f"{path}: non-finite feature values")
    return (X, np.asarray(labels)) if labeled else (X, None)


def load_dataset(labeled_path, unlabeled_path=None, fmt="csv"):
    """Load a Dataset from files; with no unlabeled file, U = points of S."""
    if fmt not in ("csv", "svmlight"):
        raise DataError(f"unknown dataset format {fmt!r}")
    loader = load_points_csv if fmt == "csv" else load_points_svmlight
    X, y = loader(labeled_path, labeled=True)
    U = None
    if unlabeled_path is not None:
        if fmt == "csv":
            U, _ = load_points_csv(unlabeled_path, labeled=False)
        else:
            U, _ = load_points_svmlight(unlabeled_path, labeled=False, d=X.shape[1])
        if U.shape[1] < X.shape[1] and fmt == "svmlight":
            U = np.pad(U, ((0, 0), (0, X.shape[1] - U.shape[1])))
    return Dataset(X=X, y=y, U=U)
