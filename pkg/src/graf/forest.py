"""Ensemble training and prediction.

Each tree gets its own feature subspace and RNG, derived from the master
seed and the tree index only, so tree k is identical no matter how many
trees are trained or how many threads run. Scores combine leaf posteriors
as sum over trees of log2(1 + posterior), which reduces to plain voting
when posteriors are one-hot.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .engine import TreeInstance, grow_tree, leaf_ordinals
from .errors import DataError, UsageError

SUBSPACE_RULES = ("log2", "sqrt", "half", "all")


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int
    subspace: int | str = "sqrt"
    min_samples_split: int = 2
    master_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise UsageError("n_trees must be at least 1")
        if self.min_samples_split < 2:
            raise UsageError("min_samples_split must be at least 2")
        if isinstance(self.subspace, str):
            if self.subspace not in SUBSPACE_RULES:
                raise UsageError(
                    f"unknown subspace rule {self.subspace!r}; "
                    f"expected one of {', '.join(SUBSPACE_RULES)} or an integer"
                )
        elif self.subspace < 1:
            raise UsageError("subspace size must be at least 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise UsageError("master_seed must fit in 64 bits")

    def resolve_subspace(self, n_features: int) -> int:
        """Concrete M for a given dimensionality (rules round up)."""
        d = n_features
        if isinstance(self.subspace, int):
            if self.subspace > d:
                raise UsageError(
                    f"subspace size {self.subspace} exceeds {d} features")
            return self.subspace
        m = {
            "log2": math.ceil(math.log2(d)) if d > 1 else 1,
            "sqrt": math.ceil(math.sqrt(d)),
            "half": math.ceil(d / 2),
            "all": d,
        }[self.subspace]
        return min(max(m, 1), d)


@dataclass
class Forest:
    trees: list[TreeInstance]
    config: ForestConfig
    n_features: int
    n_classes: int
    class_totals: np.ndarray
    class_names: tuple | None = None
    feature_names: tuple | None = None
    label_column: str | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _tree_rng(master_seed: int, k: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((master_seed, k))))


def train_forest(dataset: Dataset, config: ForestConfig,
                 threads: int = 1) -> Forest:
    """Train config.n_trees trees. Bit-identical output for any `threads`."""
    m = config.resolve_subspace(dataset.n_features)

    def build(k: int) -> TreeInstance:
        rng = _tree_rng(config.master_seed, k)
        cols = np.sort(rng.choice(dataset.n_features, size=m, replace=False))
        return grow_tree(dataset, cols, rng,
                         min_samples_split=config.min_samples_split)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(build, range(config.n_trees)))
    else:
        trees = [build(k) for k in range(config.n_trees)]

    return Forest(
        trees=trees,
        config=config,
        n_features=dataset.n_features,
        n_classes=dataset.n_classes,
        class_totals=dataset.class_totals.copy(),
        class_names=dataset.class_names,
        feature_names=dataset.feature_names,
    )


def _as_matrix(forest: Forest, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != forest.n_features:
        raise DataError(f"expected {forest.n_features} feature columns")
    if not np.isfinite(arr).all():
        raise DataError("samples contain non-finite values")
    return np.ascontiguousarray(arr), single


def predict_scores(forest: Forest, x) -> np.ndarray:
    """Per-class scores: sum over trees of log2(1 + leaf posterior)."""
    mat, single = _as_matrix(forest, x)
    scores = np.zeros((mat.shape[0], forest.n_classes), dtype=np.float64)
    for tree in forest.trees:
        ords = leaf_ordinals(tree, mat)
        scores += np.log2(1.0 + tree.posterior_matrix[ords])
    return scores[0] if single else scores


def predict(forest: Forest, x):
    """Highest-scoring class (1-based); ties go to the smallest index."""
    scores = predict_scores(forest, x)
    if scores.ndim == 1:
        return int(np.argmax(scores)) + 1
    return np.argmax(scores, axis=1).astype(np.int64) + 1


def per_tree_predictions(forest: Forest, x) -> np.ndarray:
    """(n_trees, n_samples) matrix of single-tree argmax-posterior labels."""
    mat, _ = _as_matrix(forest, np.atleast_2d(x))
    out = np.empty((len(forest.trees), mat.shape[0]), dtype=np.int64)
    for t, tree in enumerate(forest.trees):
        ords = leaf_ordinals(tree, mat)
        out[t] = np.argmax(tree.posterior_matrix[ords], axis=1) + 1
    return out


def margin(forest: Forest, x, labels) -> tuple[np.ndarray, float]:
    """Per-sample margin (+1 correct, -1 wrong) and its mean."""
    pred = predict(forest, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != pred.shape:
        raise DataError("labels do not match the number of samples")
    mg = np.where(pred == y, 1.0, -1.0)
    return mg, float(mg.mean())


def accuracy(forest: Forest, dataset: Dataset) -> float:
    return float((predict(forest, dataset.features) == dataset.labels).mean())
