"""Evaluation harness: bias-variance decomposition, ensemble
strength/correlation with the generalization-error bound, and the
cross-validated tuning protocol, plus the experiment drivers behind the
eval-* CLI commands.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .dataset import Dataset
from .errors import StratificationWarning, UsageError
from .forest import Forest, ForestConfig, accuracy, per_tree_predictions, \
    predict, train_forest

DEFAULT_GRIDS = {
    "trees": [100, 200, 500, 1000, 2000],
    "subspace": ["log2", "sqrt", "half", "all"],
    "min_samples_split": [2, 3, 4, 5],
}


@dataclass(frozen=True)
class BVResult:
    """Zero-one-loss decomposition over R models on a fixed test set."""

    bias2: float
    variance: float
    err: float
    n_models: int
    n_test: int
    flags: tuple = ()


@dataclass(frozen=True)
class SCResult:
    """Ensemble strength, inter-tree correlation, and the error bound
    rho * (1 - s^2) / s^2 (defined only for s > 0 and sd > 0)."""

    strength: float
    correlation: float
    sd: float
    pe_bound: float
    flags: tuple = ()


def kw_decompose(predictions, truth, n_classes: int) -> BVResult:
    """Decompose test error into bias^2 and variance.

    predictions is an (R, N_t) matrix of labels from R models trained on
    independent same-size resamples. With p_ij the fraction of models
    voting class j on sample i:

      bias^2  = mean_i sum_j [ (1(y_i=j) - p_ij)^2 - p_ij (1-p_ij)/(R-1) ]
      variance = 1 - mean_i sum_j p_ij^2
      err      = mean over models of their test error

    The (R-1) term is the finite-sample correction; it can push bias^2 a
    hair below zero, which gets flagged past -1e-12.
    """
    preds = np.asarray(predictions, dtype=np.int64)
    y = np.asarray(truth, dtype=np.int64)
    if preds.ndim != 2:
        raise UsageError("predictions must be (n_models, n_test)")
    r, n_t = preds.shape
    if r < 2:
        raise UsageError("need at least 2 models (the correction divides by R-1)")
    if y.shape != (n_t,):
        raise UsageError("truth length does not match predictions")

    counts = np.zeros((n_t, n_classes), dtype=np.int64)
    rows = np.arange(n_t)
    for k in range(r):
        counts[rows, preds[k] - 1] += 1
    p = counts / r

    ind = (y[:, None] == np.arange(1, n_classes + 1)).astype(np.float64)
    per_ij = (ind - p) ** 2 - p * (1.0 - p) / (r - 1)
    bias2 = float(per_ij.sum(axis=1).mean())
    variance = float(1.0 - (p * p).sum(axis=1).mean())
    err = float((preds != y).mean())

    flags = ("bias2_negative",) if bias2 < -1e-12 else ()
    return BVResult(bias2, variance, err, r, n_t, flags)


def strength_correlation(per_tree_preds, truth, n_classes: int) -> SCResult:
    """Strength s, correlation rho, and the bound rho(1-s^2)/s^2.

    Per sample, the margin proxy p_i is the vote share for the true class
    minus the largest vote share among the other classes; s is its mean.
    sd averages, over trees, sqrt(acc_t + sec_t - acc_t^2 - sec_t^2), where
    sec_t is tree t's rate of predicting the ensemble's most-voted wrong
    class. rho = (mean p_i^2 - s^2) / sd^2, flagged undefined when sd = 0.
    """
    preds = np.asarray(per_tree_preds, dtype=np.int64)
    y = np.asarray(truth, dtype=np.int64)
    if preds.ndim != 2:
        raise UsageError("per-tree predictions must be (n_trees, n_test)")
    n_trees, n_t = preds.shape
    if n_trees < 2:
        raise UsageError("need at least 2 trees")
    if y.shape != (n_t,):
        raise UsageError("truth length does not match predictions")

    votes = np.zeros((n_t, n_classes), dtype=np.int64)
    rows = np.arange(n_t)
    for t in range(n_trees):
        votes[rows, preds[t] - 1] += 1
    share = votes / n_trees

    true_share = share[rows, y - 1]
    masked = share.copy()
    masked[rows, y - 1] = -1.0
    jhat = np.argmax(masked, axis=1) + 1  # most-voted wrong class, ties low
    wrong_share = masked[rows, jhat - 1]

    p_i = true_share - wrong_share
    s = float(p_i.mean())

    acc_t = (preds == y).mean(axis=1)
    sec_t = (preds == jhat).mean(axis=1)
    sd = float(np.sqrt(acc_t + sec_t - acc_t ** 2 - sec_t ** 2).mean())

    flags = []
    if sd > 0.0:
        rho = float(((p_i ** 2).mean() - s * s) / (sd * sd))
    else:
        rho = float("nan")
        flags.append("correlation_undefined")
    if s > 0.0 and sd > 0.0:
        pe = float(rho * (1.0 - s * s) / (s * s))
    else:
        pe = float("nan")
        flags.append("pe_bound_undefined")
    return SCResult(s, rho, sd, pe, tuple(flags))


def stratified_kfold(labels, n_folds: int,
                     rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-class round-robin fold assignment after a seeded shuffle; fold
    class counts stay within one sample of proportional."""
    y = np.asarray(labels, dtype=np.int64)
    if n_folds < 2:
        raise UsageError("need at least 2 folds")
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < n_folds:
            warnings.warn(
                f"class {c} has {members.size} samples for {n_folds} folds",
                StratificationWarning, stacklevel=2)
        shuffled = rng.permutation(members)
        fold_of[shuffled] = np.arange(members.size) % n_folds
    folds = []
    for f in range(n_folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, test))
    return folds


def _seeded(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _derive_seed(*entropy) -> int:
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def cv_protocol(dataset: Dataset, grids: dict | None = None, *, seed: int = 0,
                outer_folds: int = 4, inner_folds: int = 5,
                threads: int = 1) -> dict:
    """Nested cross-validation: tune on inner folds, score on outer folds.

    Returns {"folds": [{fold, accuracy, chosen}...], "mean_accuracy": ...}.
    Grid combinations are tried in listed order; accuracy ties keep the
    first. Defaults to the full tuning grids (heavy; pass smaller lists for
    quick runs).
    """
    grids = dict(DEFAULT_GRIDS if grids is None else grids)
    for key in DEFAULT_GRIDS:
        if not grids.get(key):
            raise UsageError(f"grid {key!r} must be a non-empty list")
    combos = list(product(grids["trees"], grids["subspace"],
                          grids["min_samples_split"]))

    outer = stratified_kfold(dataset.labels, outer_folds, _seeded(seed, 20))
    fold_rows = []
    for f, (train_idx, test_idx) in enumerate(outer):
        train_ds = dataset.subset(train_idx)
        inner = stratified_kfold(train_ds.labels, inner_folds,
                                 _seeded(seed, 21, f))
        best = None
        for g, (n_trees, subspace, min_split) in enumerate(combos):
            scores = []
            for i, (fit_idx, val_idx) in enumerate(inner):
                config = ForestConfig(
                    n_trees=n_trees, subspace=subspace,
                    min_samples_split=min_split,
                    master_seed=_derive_seed(seed, 22, f, g, i))
                forest = train_forest(train_ds.subset(fit_idx), config,
                                      threads=threads)
                scores.append(accuracy(forest, train_ds.subset(val_idx)))
            mean_score = float(np.mean(scores))
            if best is None or mean_score > best[0]:
                best = (mean_score, n_trees, subspace, min_split)
        _, n_trees, subspace, min_split = best
        config = ForestConfig(n_trees=n_trees, subspace=subspace,
                              min_samples_split=min_split,
                              master_seed=_derive_seed(seed, 23, f))
        forest = train_forest(train_ds, config, threads=threads)
        fold_rows.append({
            "fold": f,
            "accuracy": accuracy(forest, dataset.subset(test_idx)),
            "chosen": {"trees": n_trees, "subspace": subspace,
                       "min_samples_split": min_split},
        })
    return {
        "folds": fold_rows,
        "mean_accuracy": float(np.mean([r["accuracy"] for r in fold_rows])),
        "seed": seed,
    }


def _pool_split(dataset: Dataset, test_fraction: float, seed: int):
    """Shuffle once into a held-out test set and a training pool."""
    if not 0.0 < test_fraction < 1.0:
        raise UsageError("test_fraction must be in (0, 1)")
    n = dataset.n_samples
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise UsageError("test split leaves no samples on one side")
    perm = _seeded(seed, 1).permutation(n)
    return perm[n_test:], perm[:n_test]


def bv_experiment(dataset: Dataset, *, train_sizes=None, trees_list=(100,),
                  subspace_list=("half",), n_models: int = 10,
                  min_samples_split: int = 2, test_fraction: float = 0.5,
                  seed: int = 0, threads: int = 1) -> list[dict]:
    """Bias-variance curves: for each (train_size, trees, subspace)
    configuration, train n_models forests on fresh without-replacement
    resamples of the training pool and decompose their joint test error.
    """
    if n_models < 2:
        raise UsageError("bias-variance needs at least 2 models")
    pool, test_idx = _pool_split(dataset, test_fraction, seed)
    if train_sizes is None:
        train_sizes = [pool.size // 2]
    test_ds = dataset.subset(test_idx)

    rows = []
    combos = list(product(train_sizes, trees_list, subspace_list))
    for cfg_i, (n_m, n_trees, subspace) in enumerate(combos):
        if not 1 <= n_m <= pool.size:
            raise UsageError(
                f"train size {n_m} exceeds the pool of {pool.size}")
        preds = np.empty((n_models, test_idx.size), dtype=np.int64)
        for r in range(n_models):
            sub_idx = _seeded(seed, 2, cfg_i, r).choice(
                pool, size=n_m, replace=False)
            config = ForestConfig(
                n_trees=n_trees, subspace=subspace,
                min_samples_split=min_samples_split,
                master_seed=_derive_seed(seed, 3, cfg_i, r))
            forest = train_forest(dataset.subset(sub_idx), config,
                                  threads=threads)
            preds[r] = predict(forest, test_ds.features)
        kw = kw_decompose(preds, test_ds.labels, dataset.n_classes)
        rows.append({
            "train_size": int(n_m), "trees": int(n_trees),
            "subspace": subspace, "models": n_models,
            "test_size": int(test_idx.size), "bias2": kw.bias2,
            "variance": kw.variance, "err": kw.err,
            "flags": ";".join(kw.flags),
        })
    return rows


def sc_experiment(dataset: Dataset, *, subspace_list, trees: int = 100,
                  n_models: int = 1, train_size: int | None = None,
                  min_samples_split: int = 2, test_fraction: float = 0.5,
                  seed: int = 0, threads: int = 1) -> list[dict]:
    """Strength/correlation versus subspace size, one row per
    (subspace, model); models train on without-replacement pool resamples
    (the whole pool when train_size is None)."""
    pool, test_idx = _pool_split(dataset, test_fraction, seed)
    test_ds = dataset.subset(test_idx)
    if train_size is not None and not 1 <= train_size <= pool.size:
        raise UsageError(f"train size {train_size} exceeds the pool")

    rows = []
    for cfg_i, subspace in enumerate(subspace_list):
        for r in range(n_models):
            if train_size is None or train_size == pool.size:
                sub_idx = pool
            else:
                sub_idx = _seeded(seed, 4, cfg_i, r).choice(
                    pool, size=train_size, replace=False)
            config = ForestConfig(
                n_trees=trees, subspace=subspace,
                min_samples_split=min_samples_split,
                master_seed=_derive_seed(seed, 5, cfg_i, r))
            forest = train_forest(dataset.subset(sub_idx), config,
                                  threads=threads)
            sc = strength_correlation(
                per_tree_predictions(forest, test_ds.features),
                test_ds.labels, dataset.n_classes)
            rows.append({
                "subspace": subspace, "model": r, "trees": trees,
                "strength": sc.strength, "correlation": sc.correlation,
                "sd": sc.sd, "pe_bound": sc.pe_bound,
                "flags": ";".join(sc.flags),
            })
    return rows
