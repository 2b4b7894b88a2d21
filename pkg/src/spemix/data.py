"""CSV ingestion, standardization and supervision splits."""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional

import numpy as np

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Input data cannot be used as given."""


class EmptyFileError(DataError):
    pass


class RaggedRowError(DataError):
    def __init__(self, line: int, found: int, expected: int):
        super().__init__(f"line {line}: row has {found} fields, expected {expected}")
        self.line, self.found, self.expected = line, found, expected


class NonNumericCellError(DataError):
    def __init__(self, line: int, column: str, value: str):
        what = "missing value" if value.strip() == "" else f"non-numeric value {value!r}"
        super().__init__(f"line {line}, column {column!r}: {what}")
        self.line, self.column, self.value = line, column, value


class ConstantColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} is constant and cannot be standardized")
        self.column = column


@dataclass
class Dataset:
    """Observations in rows; ``labels`` (when known) are integers 1..K."""

    name: str
    x: np.ndarray
    columns: List[str]
    labels: Optional[np.ndarray] = None
    label_names: Optional[List[str]] = None
    standardized: bool = False

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.x.shape[1] < 1 or self.x.shape[0] < 1:
            raise DataError("dataset needs at least one row and one column")
        if not np.all(np.isfinite(self.x)):
            raise DataError("dataset contains non-finite values")
        if len(self.columns) != self.x.shape[1]:
            raise DataError("column names do not match the data width")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.x.shape[0],) or self.labels.min() < 1:
                raise DataError("labels must be one integer in 1..K per row")

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def _encode_labels(raw: List[str]):
    """Map label strings to 1..K, numerically ordered when all are numbers."""
    names = sorted(set(raw))
    try:
        names = sorted(names, key=float)
    except ValueError:
        pass
    code = {name: k + 1 for k, name in enumerate(names)}
    return np.array([code[v] for v in raw], dtype=int), names


def load_csv(path, has_header: bool = True, label_col: Optional[str] = None,
             name: Optional[str] = None) -> Dataset:
    """Read a comma-separated file of numeric columns.

    ``label_col`` names a column to pull out as truth labels (any strings;
    they are recoded to 1..K).  Raises a distinct :class:`DataError` subclass
    for empty files, ragged rows and non-numeric cells.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i + 1, row) for i, row in enumerate(csv.reader(fh))
                if any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFileError(f"{path}: file is empty")
    if has_header:
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
        if not rows:
            raise EmptyFileError(f"{path}: header but no data rows")
    else:
        header = [f"x{j + 1}" for j in range(len(rows[0][1]))]
    width = len(header)
    if label_col is not None and label_col not in header:
        raise DataError(f"{path}: no column named {label_col!r}")
    label_idx = header.index(label_col) if label_col is not None else None
    keep = [j for j in range(width) if j != label_idx]
    if not keep:
        raise DataError(f"{path}: no numeric columns besides the labels")
    values, raw_labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise RaggedRowError(line, len(row), width)
        out = []
        for j in keep:
            try:
                out.append(_parse_float(row[j]))
            except ValueError:
                raise NonNumericCellError(line, header[j], row[j]) from None
        values.append(out)
        if label_idx is not None:
            raw_labels.append(row[label_idx].strip())
    labels, names = _encode_labels(raw_labels) if label_idx is not None else (None, None)
    return Dataset(name or path.stem, np.array(values), [header[j] for j in keep],
                   labels, names)


def write_csv(path, ds: Dataset, label_col: str = "label") -> None:
    """Write ``ds`` with full-precision values; labels go in a last column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ds.columns + ([label_col] if ds.labels is not None else []))
        for i in range(ds.N):
            row = [repr(float(v)) for v in ds.x[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def standardize(ds: Dataset) -> Dataset:
    """Centre every column and scale it to unit sample standard deviation."""
    if ds.N < 2:
        raise DataError("need at least two rows to standardize")
    mean = ds.x.mean(axis=0)
    sd = ds.x.std(axis=0, ddof=1)
    for j, s in enumerate(sd):
        if not s > 1e-12 * max(1.0, abs(mean[j])):
            raise ConstantColumnError(ds.columns[j])
    return replace(ds, x=(ds.x - mean) / sd, standardized=True)


@dataclass
class LabeledSplit:
    """Which rows keep their labels in a semi-supervised fit."""

    dataset: str
    mask: np.ndarray
    fraction: float
    seed: int
    labels: np.ndarray = field(repr=False, default=None)

    def fit_labels(self) -> np.ndarray:
        """0-based labels for labelled rows, -1 elsewhere."""
        return np.where(self.mask, self.labels - 1, -1)


def make_split(ds: Dataset, fraction: float = 0.25, seed: int = 0) -> LabeledSplit:
    """Stratified random choice of labelled rows.

    The total count is ``round(fraction * N)``, shared out across classes in
    proportion to their sizes (largest remainders first).
    """
    if ds.labels is None:
        raise DataError("a supervision split needs truth labels")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("split fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(ds.labels, return_counts=True)
    if np.any(counts < 2):
        small = [int(c) for c in classes[counts < 2]]
        log.warning("classes %s have fewer than 2 members; stratification is best effort", small)
    total = int(round(fraction * ds.N))
    exact = fraction * counts
    take = np.floor(exact).astype(int)
    order = sorted(range(len(classes)), key=lambda k: (-(exact[k] - take[k]), k))
    for k in order[:max(total - take.sum(), 0)]:
        take[k] += 1
    mask = np.zeros(ds.N, dtype=bool)
    for c, k in zip(classes, take):
        rows = np.flatnonzero(ds.labels == c)
        mask[rng.choice(rows, size=min(k, rows.size), replace=False)] = True
    return LabeledSplit(ds.name, mask, fraction, seed, ds.labels.copy())
