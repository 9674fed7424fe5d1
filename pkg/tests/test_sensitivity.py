import math

import numpy as np
import pytest

import oracles
from graf.dataset import Dataset
from graf.engine import SubspaceView, grow_tree, leaf_posteriors
from graf.errors import UsageError
from graf.forest import ForestConfig, train_forest
from graf.sensitivity import (SensitivityReport, class_normalized_sensitivity,
                              compute_sensitivity, partition_weight_count,
                              ranked_importance, read_report_csv, subsample,
                              write_report_csv)

from conftest import random_dataset


def grown_tree(seed, **kw):
    ds = random_dataset(seed, **kw)
    tree = grow_tree(ds, SubspaceView(np.arange(ds.n_features)),
                     np.random.default_rng(seed + 1000))
    return ds, leaf_posteriors(tree, ds)


# ----------------------------------------------------------- weight count

def test_weight_count_single_leaf_tree():
    ds = Dataset(np.zeros((4, 1)), np.ones(4, dtype=np.int64))
    tree = grow_tree(ds, SubspaceView(np.array([0])), np.random.default_rng(0))
    assert partition_weight_count(tree, 0) == 0
    assert tree.n_hyperplanes == 0


def leaf_parent_steps(tree):
    """step of the internal node directly above each leaf ordinal."""
    parent_step = {}
    for node in range(tree.node_step.shape[0]):
        if tree.node_leaf[node] >= 0:
            continue
        step = int(tree.node_step[node])
        for child in (tree.node_child0[node], tree.node_child1[node]):
            if tree.node_leaf[child] >= 0:
                parent_step[int(tree.node_leaf[child])] = step
    return parent_step


def test_weight_count_is_finalization_step():
    # every leaf that was classified the moment its parent split carries
    # the global hyperplane count of exactly that step
    for seed in range(8):
        ds, tree = grown_tree(seed)
        if tree.n_hyperplanes == 0:
            continue
        parents = leaf_parent_steps(tree)
        for ordinal, leaf in enumerate(tree.leaves):
            assert leaf.weight_count == parents[ordinal]
            assert leaf.weight_count <= tree.n_hyperplanes
            assert partition_weight_count(tree, ordinal) == leaf.weight_count


def test_leaves_from_same_step_share_count():
    for seed in range(20):
        ds, tree = grown_tree(seed)
        by_step = {}
        for leaf in tree.leaves:
            by_step.setdefault(leaf.weight_count, []).append(leaf)
        # siblings split at one step always agree (tautological grouping,
        # but guards against per-leaf drift in the bookkeeping)
        parents = leaf_parent_steps(tree) if tree.n_hyperplanes else {}
        for ordinal, leaf in enumerate(tree.leaves):
            if ordinal in parents:
                assert leaf.weight_count == parents[ordinal]


# ------------------------------------------------------ ranked importance

def test_theta_is_weight_over_rank():
    for seed in range(8):
        ds, tree = grown_tree(seed)
        theta = ranked_importance(tree, ds)
        for leaf in tree.leaves:
            members = leaf.sample_indices          # ascending already
            for rank, i in enumerate(members, start=1):
                assert theta[i] == leaf.weight_count / rank


def test_theta_oracle_values():
    # a leaf with W=5 and 3 members yields 5, 2.5, 5/3 down the rank order
    for seed in range(40):
        ds, tree = grown_tree(seed)
        theta = ranked_importance(tree, ds)
        for leaf in tree.leaves:
            if leaf.weight_count == 5 and leaf.sample_indices.size == 3:
                got = theta[leaf.sample_indices]
                assert got.tolist() == [5.0, 2.5, 5.0 / 3.0]
                return
    pytest.skip("no W=5 three-member leaf in sampled trees")


def test_theta_zero_weight_leaf():
    ds = Dataset(np.random.default_rng(0).normal(size=(6, 2)),
                 np.ones(6, dtype=np.int64))
    tree = grow_tree(ds, SubspaceView(np.arange(2)), np.random.default_rng(1))
    tree = leaf_posteriors(tree, ds)
    theta = ranked_importance(tree, ds)
    assert np.all(theta == 0.0)


def test_theta_singleton_leaf_gets_full_weight():
    for seed in range(10):
        ds, tree = grown_tree(seed)
        theta = ranked_importance(tree, ds)
        for leaf in tree.leaves:
            if leaf.sample_indices.size == 1:
                assert theta[leaf.sample_indices[0]] == leaf.weight_count


def test_theta_strictly_decreasing_within_leaf():
    ds, tree = grown_tree(31, n_max=80)
    theta = ranked_importance(tree, ds)
    for leaf in tree.leaves:
        vals = theta[leaf.sample_indices]
        if leaf.weight_count > 0:
            assert np.all(np.diff(vals) < 0)


def test_shuffle_rank_order_is_seeded():
    ds, tree = grown_tree(7)
    rng1 = np.random.default_rng(55)
    rng2 = np.random.default_rng(55)
    a = ranked_importance(tree, ds, rank_order="shuffle", rng=rng1)
    b = ranked_importance(tree, ds, rank_order="shuffle", rng=rng2)
    assert np.array_equal(a, b)
    # same multiset of theta values per leaf, possibly different owners
    base = ranked_importance(tree, ds)
    for leaf in tree.leaves:
        assert sorted(a[leaf.sample_indices]) == \
            sorted(base[leaf.sample_indices])


# ------------------------------------------------------ class-normalized

def test_class_normalization_fractions():
    theta = np.array([5.0, 2.5, 5.0 / 3.0])
    s = class_normalized_sensitivity(theta, np.array([1, 1, 1]), 1)
    want = [math.log(17 / 11), math.log(14 / 11), math.log(13 / 11)]
    assert s == pytest.approx(want, rel=1e-12)


def test_sole_owner_of_class_mass_gets_log2():
    s = class_normalized_sensitivity(np.array([3.0, 9.9]),
                                     np.array([1, 2]), 2)
    assert s == pytest.approx([math.log(2), math.log(2)])


def test_identical_profiles_identical_outputs():
    theta = np.array([4.0, 1.0, 4.0, 1.0])
    s = class_normalized_sensitivity(theta, np.array([1, 1, 2, 2]), 2)
    assert s[0] == s[2] and s[1] == s[3]


def test_zero_mass_class_shares_uniformly():
    theta = np.array([0.0, 0.0, 0.0, 7.0])
    s = class_normalized_sensitivity(theta, np.array([1, 1, 1, 2]), 2)
    assert s[:3] == pytest.approx([math.log(4 / 3)] * 3)
    assert s[3] == pytest.approx(math.log(2))


def test_sensitivity_range_bound():
    # s in (0, ln 2] whenever the class mass is positive
    for seed in range(5):
        ds, tree = grown_tree(seed)
        theta = ranked_importance(tree, ds)
        s = class_normalized_sensitivity(theta, ds.labels, ds.n_classes)
        assert np.all(s > 0.0)
        assert np.all(s <= math.log(2) + 1e-15)


# ------------------------------------------------------------- aggregate

def test_single_tree_mean_is_itself():
    ds = random_dataset(13, balanced=True)
    forest = train_forest(ds, ForestConfig(n_trees=1, subspace="all",
                                           master_seed=4))
    report = compute_sensitivity(forest, ds, keep_per_tree=True)
    theta = ranked_importance(forest.trees[0], ds)
    s = class_normalized_sensitivity(theta, ds.labels, ds.n_classes)
    assert np.array_equal(report.mean_sensitivity, s)
    assert report.per_tree.shape == (ds.n_samples, 1)


def test_mean_over_trees_and_probabilities():
    ds = random_dataset(17, balanced=True)
    forest = train_forest(ds, ForestConfig(n_trees=5, subspace="half",
                                           master_seed=9))
    report = compute_sensitivity(forest, ds, keep_per_tree=True)
    assert report.per_tree.shape == (ds.n_samples, 5)
    want = report.per_tree.mean(axis=1)
    assert report.mean_sensitivity == pytest.approx(want, rel=1e-12)
    assert report.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert report.probabilities == pytest.approx(
        report.mean_sensitivity / report.mean_sensitivity.sum(), rel=1e-12)


def test_full_pipeline_matches_oracle():
    ds = random_dataset(23, balanced=True)
    forest = train_forest(ds, ForestConfig(n_trees=3, subspace="all",
                                           master_seed=1))
    report = compute_sensitivity(forest, ds)
    per_tree = []
    for tree in forest.trees:
        members = [leaf.sample_indices.tolist() for leaf in tree.leaves]
        weights = [leaf.weight_count for leaf in tree.leaves]
        per_tree.append(oracles.tree_sensitivity(
            members, weights, ds.labels.tolist(), ds.n_classes))
    mean, probs = oracles.aggregate_sensitivity(per_tree)
    assert report.mean_sensitivity == pytest.approx(mean, rel=1e-12)
    assert report.probabilities == pytest.approx(probs, rel=1e-12)


# ------------------------------------------------------------- subsample

def flat_report(n, sens=None):
    s = np.asarray(sens, dtype=float) if sens is not None \
        else np.ones(n, dtype=float)
    return SensitivityReport(s, s / s.sum(), np.ones(n, dtype=np.int64))


def test_subsample_fraction_one_returns_everything():
    report = flat_report(9)
    rng = np.random.default_rng(0)
    for mode in ("uniform", "weighted", "top"):
        idx = subsample(report, 1.0, mode, rng)
        assert idx.tolist() == list(range(9))


def test_subsample_top_takes_highest():
    report = flat_report(8, [0.1, 0.9, 0.3, 0.8, 0.2, 0.2, 0.2, 0.2])
    idx = subsample(report, 0.25, "top")
    assert idx.tolist() == [1, 3]


def test_subsample_top_ties_ascending_index():
    report = flat_report(4, [0.5, 0.5, 0.5, 0.5])
    idx = subsample(report, 0.5, "top")
    assert idx.tolist() == [0, 1]


def test_subsample_weighted_certain_point():
    probs = np.array([0.0, 1.0, 0.0, 0.0])
    s = np.array([1e-300, 1.0, 1e-300, 1e-300])
    report = SensitivityReport(s / s.sum() * 0 + probs, probs,
                               np.ones(4, dtype=np.int64))
    for seed in range(10):
        idx = subsample(report, 0.25, "weighted", np.random.default_rng(seed))
        assert idx.tolist() == [1]


def test_subsample_uniform_seeded_and_sorted():
    report = flat_report(50)
    a = subsample(report, 0.3, "uniform", np.random.default_rng(3))
    b = subsample(report, 0.3, "uniform", np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert a.size == math.ceil(0.3 * 50)
    assert np.all(np.diff(a) > 0)


def test_subsample_rejects_bad_arguments():
    report = flat_report(4)
    with pytest.raises(UsageError):
        subsample(report, 0.0, "top")
    with pytest.raises(UsageError):
        subsample(report, 1.5, "top")
    with pytest.raises(UsageError):
        subsample(report, 0.5, "numerous")
    with pytest.raises(UsageError):
        subsample(report, 0.5, "uniform")    # rng required


# ------------------------------------------------------------------- csv

def test_report_csv_round_trip(tmp_path):
    ds = random_dataset(29, balanced=True)
    forest = train_forest(ds, ForestConfig(n_trees=2, master_seed=3))
    report = compute_sensitivity(forest, ds)
    path = tmp_path / "sens.csv"
    write_report_csv(report, path)
    back = read_report_csv(path)
    assert np.array_equal(back.mean_sensitivity, report.mean_sensitivity)
    assert np.array_equal(back.probabilities, report.probabilities)
    assert np.array_equal(back.labels, report.labels)


def test_report_validation():
    with pytest.raises(Exception):
        SensitivityReport(np.ones(3), np.array([0.5, 0.5, 0.5]),
                          np.ones(3, dtype=np.int64))
    with pytest.raises(Exception):
        SensitivityReport(np.ones(2), np.array([1.0]),
                          np.ones(2, dtype=np.int64))
