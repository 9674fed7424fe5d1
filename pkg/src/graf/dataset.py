"""Dataset container and CSV loading.

Labels are stored internally as integers 1..C. When data comes from a CSV
file the original label strings are kept as ``class_names`` (mapped in order
of first appearance) so predictions can be written back in the user's own
vocabulary.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class Dataset:
    """An in-memory labelled dataset.

    Parameters
    ----------
    features : ndarray of shape (n_samples, n_features), float64
        Feature matrix; must be finite.
    labels : ndarray of shape (n_samples,), int64
        Class labels in 1..n_classes.
    n_classes : int, optional
        Number of classes. Defaults to ``labels.max()``; pass explicitly when
        a subset may be missing some class entirely (e.g. CV folds).
    class_names : tuple, optional
        Original label values, one per class, index c-1 for class c.
    feature_names : tuple of str, optional
        Column names, one per feature.
    """

    features: np.ndarray
    labels: np.ndarray
    n_classes: int = 0
    class_names: tuple | None = None
    feature_names: tuple | None = None
    class_totals: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise DataError(f"features must be 2-d, got shape {X.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError(f"need at least one sample and one feature, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DataError(f"labels shape {y.shape} does not match {X.shape[0]} samples")
        if not np.isfinite(X).all():
            raise DataError("features contain non-finite values")
        if self.n_classes == 0:
            self.n_classes = int(y.max()) if y.size else 0
        if self.n_classes < 1:
            raise DataError("n_classes must be at least 1")
        if y.min() < 1 or y.max() > self.n_classes:
            raise DataError(f"labels must lie in 1..{self.n_classes}")
        if self.class_names is not None and len(self.class_names) != self.n_classes:
            raise DataError("class_names length must equal n_classes")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length must equal n_features")
        self.features = X
        self.labels = y
        self.class_totals = np.bincount(y, minlength=self.n_classes + 1)[1:].copy()

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        """Row subset keeping the full class universe (totals recomputed)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            n_classes=self.n_classes,
            class_names=self.class_names,
            feature_names=self.feature_names,
        )

    def display_label(self, c: int):
        """The user-facing value for internal class c (1-based)."""
        if self.class_names is not None:
            return self.class_names[c - 1]
        return c


def load_csv(path, label_column: str = "label") -> Dataset:
    """Read a labelled dataset from a CSV file with a header row.

    Every non-label column is parsed as a float feature. Labels map to 1..C
    in order of first appearance. Malformed cells report their row and
    column; row numbers count from 1 at the first data row.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        if not feature_names:
            raise DataError(f"{path}: no feature columns besides {label_column!r}")

        rows = []
        raw_labels = []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(
                    f"{path}: row {r}: expected {len(header)} fields, got {len(rec)}"
                )
            vals = []
            for i, cell in enumerate(rec):
                if i == label_idx:
                    continue
                text = cell.strip()
                if not text:
                    raise DataError(f"{path}: row {r}, column {header[i]!r}: empty value")
                try:
                    v = float(text)
                except ValueError:
                    raise DataError(
                        f"{path}: row {r}, column {header[i]!r}: not a number: {text!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {r}, column {header[i]!r}: non-finite value {text!r}"
                    )
                vals.append(v)
            rows.append(vals)
            raw_labels.append(rec[label_idx].strip())

    if not rows:
        raise DataError(f"{path}: no data rows")

    name_to_class: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, name in enumerate(raw_labels):
        if name not in name_to_class:
            name_to_class[name] = len(name_to_class) + 1
        labels[i] = name_to_class[name]
    class_names = tuple(name_to_class)

    X = np.array(rows, dtype=np.float64)
    return Dataset(X, labels, n_classes=len(class_names),
                   class_names=class_names, feature_names=feature_names)


def align_labels(dataset: Dataset, class_names: tuple) -> Dataset:
    """Remap a dataset's labels onto a stored class vocabulary.

    Matches by display value (class_names for CSV data, 1..C otherwise), so
    data files whose labels first appear in a different order still line up
    with a trained model. A label the vocabulary does not contain is an
    error.
    """
    position = {str(name): c + 1 for c, name in enumerate(class_names)}
    mapped = np.empty(dataset.n_samples, dtype=np.int64)
    for i in range(dataset.n_samples):
        shown = str(dataset.display_label(int(dataset.labels[i])))
        if shown not in position:
            raise DataError(
                f"label {shown!r} is not among the model's classes "
                f"{[str(n) for n in class_names]}")
        mapped[i] = position[shown]
    return Dataset(dataset.features, mapped, n_classes=len(class_names),
                   class_names=tuple(class_names),
                   feature_names=dataset.feature_names)


def load_features_csv(path, drop_column: str | None = None):
    """Read a feature matrix from a CSV with a header row.

    If `drop_column` names a header column it is skipped (lets prediction
    accept files that still carry the training label column). Returns
    (features, feature_names).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        drop_idx = header.index(drop_column) if drop_column in header else -1
        names = tuple(h for i, h in enumerate(header) if i != drop_idx)
        if not names:
            raise DataError(f"{path}: no feature columns")
        rows = []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(
                    f"{path}: row {r}: expected {len(header)} fields, "
                    f"got {len(rec)}")
            vals = []
            for i, cell in enumerate(rec):
                if i == drop_idx:
                    continue
                text = cell.strip()
                try:
                    v = float(text)
                except ValueError:
                    raise DataError(
                        f"{path}: row {r}, column {header[i]!r}: "
                        f"not a number: {text!r}") from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {r}, column {header[i]!r}: "
                        f"non-finite value {text!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64), names


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset as CSV (features then the label column)."""
    names = dataset.feature_names or tuple(
        f"f{j + 1}" for j in range(dataset.n_features)
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(names) + [label_column])
        for i in range(dataset.n_samples):
            row = [repr(float(v)) for v in dataset.features[i]]
            row.append(str(dataset.display_label(int(dataset.labels[i]))))
            writer.writerow(row)
