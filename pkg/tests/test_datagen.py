import math

import numpy as np
import pytest
from scipy import stats

from graf.datagen import (GenSpec, boundary_distance, gen_pattern, gen_rbf,
                          generate, near_boundary, rbf_params)
from graf.errors import UsageError


# ------------------------------------------------------------- spec guard

def test_spec_validation():
    with pytest.raises(UsageError):
        GenSpec(kind="moons", n_samples=10)
    with pytest.raises(UsageError):
        GenSpec(kind="rbf", n_samples=0)
    with pytest.raises(UsageError):
        GenSpec(kind="rbf", n_samples=10, n_centroids=1, n_classes=2)
    with pytest.raises(UsageError):
        GenSpec(kind="circles", n_samples=10, n_features=3)
    with pytest.raises(UsageError):
        GenSpec(kind="xor", n_samples=10, n_classes=3)
    with pytest.raises(UsageError):
        GenSpec(kind="pie", n_samples=10, n_classes=4, sectors=3)


def test_pie_sector_defaults():
    assert GenSpec(kind="pie", n_samples=1, n_classes=2).resolved_sectors() == 4
    assert GenSpec(kind="pie", n_samples=1, n_classes=3).resolved_sectors() == 6
    assert GenSpec(kind="pie", n_samples=1, n_classes=4).resolved_sectors() == 4
    assert GenSpec(kind="pie", n_samples=1, n_classes=4,
                   sectors=8).resolved_sectors() == 8


# ------------------------------------------------------------ determinism

@pytest.mark.parametrize("kind,extra", [
    ("rbf", dict(n_features=10, n_centroids=10)),
    ("circles", {}),
    ("pie", {}),
    ("xor", {}),
])
def test_generation_deterministic(kind, extra):
    spec = GenSpec(kind=kind, n_samples=100, n_classes=2, seed=7, **extra)
    a = generate(spec)
    b = generate(spec)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert a.n_classes == 2
    assert np.isfinite(a.features).all()
    assert a.labels.min() >= 1 and a.labels.max() <= 2


def test_different_seeds_differ():
    a = generate(GenSpec(kind="xor", n_samples=50, seed=1))
    b = generate(GenSpec(kind="xor", n_samples=50, seed=2))
    assert not np.array_equal(a.features, b.features)


# -------------------------------------------------------------------- rbf

def test_rbf_label_histogram_matches_mixture_weights():
    # class probability = sum of that class's centroid weights; the observed
    # histogram should pass a chi-square test in at least 9 of 10 seeds
    n = 2000
    ok = 0
    for seed in range(10):
        spec = GenSpec(kind="rbf", n_samples=n, n_features=4,
                       n_centroids=10, n_classes=3, seed=seed)
        _, _, weights = rbf_params(spec)
        expected = np.zeros(3)
        for centroid, w in enumerate(weights):
            expected[centroid % 3] += w
        ds = gen_rbf(spec)
        observed = np.bincount(ds.labels, minlength=4)[1:]
        chi2 = float(((observed - n * expected) ** 2 / (n * expected)).sum())
        if chi2 < stats.chi2.ppf(0.999, df=2):
            ok += 1
    assert ok >= 9


def test_rbf_points_near_some_centroid():
    spec = GenSpec(kind="rbf", n_samples=300, n_features=3, n_centroids=5,
                   n_classes=2, seed=3)
    centroids, radii, _ = rbf_params(spec)
    ds = gen_rbf(spec)
    # each sample within a few radii of at least one centroid of its class
    dist = np.linalg.norm(ds.features[:, None, :] - centroids[None], axis=2)
    nearest = dist.min(axis=1)
    assert np.mean(nearest < 5 * radii.max()) > 0.99


# ---------------------------------------------------------------- pattern

def test_xor_binary_quadrant_parity():
    ds = generate(GenSpec(kind="xor", n_samples=400, n_classes=2, seed=5))
    right = ds.features[:, 0] > 0
    top = ds.features[:, 1] > 0
    assert np.array_equal(ds.labels, 1 + (right ^ top).astype(np.int64))
    # representative points: (+,+) and (-,-) share a class, (+,-) differs
    pp = ds.labels[right & top]
    mm = ds.labels[~right & ~top]
    pm = ds.labels[right & ~top]
    assert np.all(pp == 1) and np.all(mm == 1) and np.all(pm == 2)


def test_xor_four_class_grid():
    ds = generate(GenSpec(kind="xor", n_samples=400, n_classes=4, seed=6))
    right = (ds.features[:, 0] > 0).astype(np.int64)
    top = (ds.features[:, 1] > 0).astype(np.int64)
    assert np.array_equal(ds.labels, 1 + right + 2 * top)


def test_circles_annulus_labels():
    c = 3
    ds = generate(GenSpec(kind="circles", n_samples=600, n_classes=c, seed=8))
    r = np.linalg.norm(ds.features, axis=1)
    ring = np.minimum((r * c).astype(np.int64), c - 1) + 1
    assert np.array_equal(ds.labels, ring)
    assert r.max() < 1.0
    # radius 0.2 lands in class 1, radius 0.8 in class 2 for C=2
    ds2 = generate(GenSpec(kind="circles", n_samples=600, n_classes=2, seed=9))
    r2 = np.linalg.norm(ds2.features, axis=1)
    assert np.all(ds2.labels[r2 < 0.5] == 1)
    assert np.all(ds2.labels[r2 > 0.5] == 2)


def test_pie_sector_labels():
    spec = GenSpec(kind="pie", n_samples=800, n_classes=4, seed=10)
    ds = gen_pattern(spec)
    s = spec.resolved_sectors()
    assert s == 4
    theta = np.mod(np.arctan2(ds.features[:, 1], ds.features[:, 0]),
                   2 * np.pi)
    sector = np.minimum((theta / (2 * np.pi / s)).astype(np.int64), s - 1)
    assert np.array_equal(ds.labels, (sector % 4) + 1)
    # 10 degrees sits in the first sector (class 1), 100 in the second
    deg = np.degrees(theta)
    assert np.all(ds.labels[(deg > 1) & (deg < 89)] == 1)
    assert np.all(ds.labels[(deg > 91) & (deg < 179)] == 2)


def test_pie_two_class_alternates_sectors():
    spec = GenSpec(kind="pie", n_samples=500, n_classes=2, seed=11)
    ds = gen_pattern(spec)
    theta = np.mod(np.arctan2(ds.features[:, 1], ds.features[:, 0]),
                   2 * np.pi)
    sector = np.minimum((theta / (2 * np.pi / 4)).astype(np.int64), 3)
    assert np.array_equal(ds.labels, (sector % 2) + 1)


# --------------------------------------------------------------- boundary

def test_boundary_distance_xor():
    spec = GenSpec(kind="xor", n_samples=1, n_classes=2)
    pts = np.array([[0.3, -0.05], [0.5, 0.5], [-0.02, 0.9]])
    d = boundary_distance(spec, pts)
    assert d == pytest.approx([0.05, 0.5, 0.02])


def test_boundary_distance_circles():
    spec = GenSpec(kind="circles", n_samples=1, n_classes=2)
    pts = np.array([[0.45, 0.0], [0.0, 0.1]])
    d = boundary_distance(spec, pts)
    assert d[0] == pytest.approx(0.05)
    assert d[1] == pytest.approx(0.4)


def test_boundary_distance_pie():
    spec = GenSpec(kind="pie", n_samples=1, n_classes=4)
    phi = 0.1
    r = 0.5
    pts = np.array([[r * math.cos(phi), r * math.sin(phi)]])
    d = boundary_distance(spec, pts)
    assert d[0] == pytest.approx(r * math.sin(phi))


def test_near_boundary_mask():
    spec = GenSpec(kind="xor", n_samples=1, n_classes=2)
    pts = np.array([[0.05, 0.7], [0.6, 0.7]])
    mask = near_boundary(spec, pts, delta=0.1)
    assert mask.tolist() == [True, False]
