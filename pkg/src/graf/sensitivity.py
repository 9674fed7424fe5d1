"""Per-sample sensitivity scores and data subsampling.

A sample that needs many hyperplanes before its partition purifies sits in
a hard-to-separate region; its leaf's weight count captures that. Within a
leaf the count is discounted by rank, normalized class-wise, squashed by
ln(1+.) and averaged over trees. The resulting distribution favors samples
near class boundaries and drives the subsample modes.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .dataset import Dataset
from .engine import TreeInstance, leaf_ordinals
from .errors import DataError, InternalError, UsageError
from .forest import Forest


class SensitivityReport:
    """Aggregated sensitivities: ŝ per sample and the probability vector."""

    def __init__(self, mean_sensitivity, probabilities, labels,
                 per_tree=None):
        self.mean_sensitivity = np.asarray(mean_sensitivity, dtype=np.float64)
        self.probabilities = np.asarray(probabilities, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.per_tree = per_tree
        n = self.mean_sensitivity.shape[0]
        if self.probabilities.shape[0] != n or self.labels.shape[0] != n:
            raise UsageError("report arrays must have equal length")
        if (self.probabilities < 0).any():
            raise InternalError("negative sampling probability")
        if abs(float(self.probabilities.sum()) - 1.0) > 1e-9:
            raise InternalError("sampling probabilities do not sum to 1")

    @property
    def n_samples(self) -> int:
        return int(self.mean_sensitivity.shape[0])


def partition_weight_count(tree: TreeInstance, leaf) -> int:
    """Hyperplane count at the step the leaf stopped being impure."""
    if isinstance(leaf, (int, np.integer)):
        leaf = tree.leaves[int(leaf)]
    return leaf.weight_count


def ranked_importance(tree: TreeInstance, dataset: Dataset, *,
                      rank_order: str = "index",
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Per-sample theta: leaf weight count divided by within-leaf rank.

    Ranks run 1..|leaf| over the leaf's members, by ascending dataset index
    by default, or by a seeded shuffle when rank_order="shuffle".
    """
    n = dataset.n_samples
    ords = leaf_ordinals(tree, dataset.features)
    w_leaf = tree.weight_counts()
    if rank_order == "index":
        sort_idx = np.argsort(ords, kind="stable")
    elif rank_order == "shuffle":
        if rng is None:
            raise UsageError("rank_order='shuffle' needs an rng")
        pos = np.empty(n, dtype=np.int64)
        pos[rng.permutation(n)] = np.arange(n, dtype=np.int64)
        sort_idx = np.lexsort((pos, ords))
    else:
        raise UsageError(f"unknown rank_order {rank_order!r}")

    group_sizes = np.bincount(ords, minlength=len(tree.leaves))
    group_ends = np.cumsum(group_sizes)
    offsets = np.repeat(group_ends - group_sizes, group_sizes)
    ranks = np.arange(n, dtype=np.int64) - offsets + 1

    theta = np.empty(n, dtype=np.float64)
    theta[sort_idx] = w_leaf[ords[sort_idx]] / ranks
    return theta


def class_normalized_sensitivity(theta: np.ndarray, labels: np.ndarray,
                                 n_classes: int) -> np.ndarray:
    """s_i = ln(1 + theta_i / Theta_class(i)); a class whose theta mass is
    zero falls back to the uniform share 1/|class| inside the log."""
    labels0 = np.asarray(labels, dtype=np.int64) - 1
    mass = np.bincount(labels0, weights=theta, minlength=n_classes)
    sizes = np.bincount(labels0, minlength=n_classes)
    denom = mass[labels0]
    ratio = np.divide(theta, denom, out=np.zeros_like(theta), where=denom > 0)
    degenerate = denom <= 0
    if degenerate.any():
        ratio[degenerate] = 1.0 / sizes[labels0[degenerate]]
    return np.log1p(ratio)


def compute_sensitivity(forest: Forest, dataset: Dataset, *,
                        rank_order: str = "index", rank_seed: int = 0,
                        keep_per_tree: bool = False) -> SensitivityReport:
    """Mean sensitivity over all trees plus the normalized probabilities."""
    if dataset.n_features != forest.n_features:
        raise DataError(
            f"dataset has {dataset.n_features} features, "
            f"model expects {forest.n_features}")
    if dataset.n_classes != forest.n_classes:
        raise DataError("dataset class count does not match the model")
    n = dataset.n_samples
    total = np.zeros(n, dtype=np.float64)
    # retained as one column per tree (rows are samples)
    cols = np.empty((n, len(forest.trees))) if keep_per_tree else None
    for t, tree in enumerate(forest.trees):
        rng = None
        if rank_order == "shuffle":
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence((rank_seed, t))))
        theta = ranked_importance(tree, dataset, rank_order=rank_order,
                                  rng=rng)
        s = class_normalized_sensitivity(theta, dataset.labels,
                                         dataset.n_classes)
        total += s
        if cols is not None:
            cols[:, t] = s
    mean = total / len(forest.trees)
    if (mean <= 0).any():
        raise InternalError("non-positive mean sensitivity")
    probs = mean / mean.sum()
    return SensitivityReport(mean, probs, dataset.labels, per_tree=cols)


def subsample(report: SensitivityReport, fraction: float, mode: str,
              rng: np.random.Generator | None = None) -> np.ndarray:
    """ceil(fraction * N) sample indices, ascending.

    uniform: without-replacement uniform draw. weighted: without-replacement
    draw proportional to the report probabilities. top: the highest-ŝ
    samples, ties broken by ascending index.
    """
    if not 0.0 < fraction <= 1.0:
        raise UsageError("fraction must be in (0, 1]")
    n = report.n_samples
    k = math.ceil(fraction * n)
    if k < 1:
        raise UsageError("fraction selects zero samples")
    if mode == "uniform":
        if rng is None:
            raise UsageError(f"mode {mode!r} needs an rng")
        idx = rng.choice(n, size=k, replace=False)
    elif mode == "weighted":
        if rng is None:
            raise UsageError(f"mode {mode!r} needs an rng")
        idx = rng.choice(n, size=k, replace=False, p=report.probabilities)
    elif mode == "top":
        idx = np.argsort(-report.mean_sensitivity, kind="stable")[:k]
    else:
        raise UsageError(f"unknown mode {mode!r}")
    return np.sort(idx.astype(np.int64))


def write_report_csv(report: SensitivityReport, path,
                     class_names: tuple | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "label", "mean_sensitivity", "probability"])
        for i in range(report.n_samples):
            c = int(report.labels[i])
            shown = class_names[c - 1] if class_names is not None else c
            writer.writerow([i, shown,
                             repr(float(report.mean_sensitivity[i])),
                             repr(float(report.probabilities[i]))])


def read_report_csv(path) -> SensitivityReport:
    """Rebuild a report from its CSV form (labels become 1..C by first
    appearance; good enough for subsampling, which only needs ŝ and p)."""
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
        expected = ["index", "label", "mean_sensitivity", "probability"]
        if [h.strip() for h in header] != expected:
            raise DataError(
                f"{path}: expected header {','.join(expected)}")
        mean, probs, names = [], [], []
        for r, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != 4:
                raise DataError(f"{path}: row {r}: expected 4 fields")
            try:
                mean.append(float(rec[2]))
                probs.append(float(rec[3]))
            except ValueError:
                raise DataError(f"{path}: row {r}: malformed number") from None
            names.append(rec[1])
    if not mean:
        raise DataError(f"{path}: no data rows")
    seen: dict[str, int] = {}
    labels = np.empty(len(names), dtype=np.int64)
    for i, name in enumerate(names):
        if name not in seen:
            seen[name] = len(seen) + 1
        labels[i] = seen[name]
    return SensitivityReport(np.array(mean), np.array(probs), labels)
