"""Synthetic dataset generators.

rbf: a mixture of Gaussian blobs with round-robin class assignment, for
bias-variance and strength/correlation sweeps. circles / pie / xor: 2-D
patterns with exactly known class boundaries, used by the sensitivity
experiments (the boundary_distance helper measures how close each point is
to a class boundary).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import UsageError

KINDS = ("rbf", "circles", "pie", "xor")
_KIND_TAG = {k: i for i, k in enumerate(KINDS)}


@dataclass(frozen=True)
class GenSpec:
    kind: str
    n_samples: int
    n_features: int = 2
    n_centroids: int = 10
    n_classes: int = 2
    sectors: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown kind {self.kind!r}; expected "
                             + ", ".join(KINDS))
        if self.n_samples < 1:
            raise UsageError("n_samples must be at least 1")
        if self.n_classes < 2:
            raise UsageError("n_classes must be at least 2")
        if self.kind == "rbf":
            if self.n_features < 1:
                raise UsageError("rbf needs n_features >= 1")
            if self.n_centroids < self.n_classes:
                raise UsageError("rbf needs n_centroids >= n_classes")
        else:
            if self.n_features != 2:
                raise UsageError(f"{self.kind} patterns are 2-dimensional")
        if self.kind == "xor" and self.n_classes not in (2, 4):
            raise UsageError("xor supports 2 or 4 classes")
        if self.kind == "pie":
            s = self.resolved_sectors()
            if s < self.n_classes:
                raise UsageError("pie needs sectors >= n_classes")

    def resolved_sectors(self) -> int:
        if self.sectors is not None:
            return self.sectors
        c = self.n_classes
        # few classes get doubled-up alternating wedges so the pie actually
        # looks like a pie and has interior boundaries
        return c if c >= 4 else 2 * c

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(
            np.random.SeedSequence((self.seed, _KIND_TAG[self.kind]))))


def rbf_params(spec: GenSpec, rng=None):
    """The mixture behind gen_rbf: (centroids, radii, weights).

    Deterministic per spec; gen_rbf draws exactly these before sampling, so
    callers can compute expected class frequencies as sums of weights.
    """
    if spec.kind != "rbf":
        raise UsageError("rbf_params needs kind='rbf'")
    rng = rng or spec.rng()
    k, d = spec.n_centroids, spec.n_features
    centroids = rng.uniform(-1.0, 1.0, size=(k, d))
    radius = rng.uniform(0.05, 0.4, size=k)
    weights = rng.random(k)
    weights /= weights.sum()
    return centroids, radius, weights


def gen_rbf(spec: GenSpec) -> Dataset:
    """Gaussian mixture: centroids uniform in [-1,1]^d with random radii
    (0.05..0.4) and random mixture weights; class = centroid index mod C."""
    if spec.kind != "rbf":
        raise UsageError("gen_rbf needs kind='rbf'")
    rng = spec.rng()
    k, n = spec.n_centroids, spec.n_samples
    centroids, radius, weights = rbf_params(spec, rng)
    chosen = rng.choice(k, size=n, p=weights)
    x = centroids[chosen] + rng.standard_normal(
        (n, spec.n_features)) * radius[chosen, None]
    labels = (chosen % spec.n_classes) + 1
    return Dataset(x, labels, n_classes=spec.n_classes)


def gen_pattern(spec: GenSpec) -> Dataset:
    """circles: class c fills the annulus ((c-1)/C, c/C] of the unit disc.
    pie: points uniform in the disc, class = sector index mod C.
    xor: uniform in [-1,1]^2, class by quadrant parity, or one class per
    quadrant when n_classes=4."""
    if spec.kind == "rbf":
        raise UsageError("gen_pattern handles circles, pie, and xor")
    rng = spec.rng()
    n, c = spec.n_samples, spec.n_classes

    if spec.kind == "circles":
        labels = (np.arange(n, dtype=np.int64) % c) + 1
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        radius = (labels - 1 + rng.random(n)) / c
        x = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    elif spec.kind == "pie":
        s = spec.resolved_sectors()
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        radius = np.sqrt(rng.random(n))
        x = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
        sector = np.minimum((theta / (2.0 * np.pi / s)).astype(np.int64), s - 1)
        labels = (sector % c) + 1
    else:  # xor
        x = rng.uniform(-1.0, 1.0, size=(n, 2))
        right = x[:, 0] > 0
        top = x[:, 1] > 0
        if c == 2:
            labels = 1 + (right ^ top).astype(np.int64)
        else:
            labels = 1 + right.astype(np.int64) + 2 * top.astype(np.int64)
    return Dataset(x, labels, n_classes=c)


def generate(spec: GenSpec) -> Dataset:
    return gen_rbf(spec) if spec.kind == "rbf" else gen_pattern(spec)


def boundary_distance(spec: GenSpec, features: np.ndarray) -> np.ndarray:
    """Euclidean distance from each 2-D point to the nearest class boundary
    of the pattern (pattern scale is 1 for all three kinds)."""
    if spec.kind == "rbf":
        raise UsageError("boundary_distance is defined for pattern kinds")
    x = np.asarray(features, dtype=np.float64)
    c = spec.n_classes

    if spec.kind == "xor":
        return np.minimum(np.abs(x[:, 0]), np.abs(x[:, 1]))

    r = np.hypot(x[:, 0], x[:, 1])
    if spec.kind == "circles":
        ring = np.arange(1, c) / c
        return np.abs(r[:, None] - ring).min(axis=1)

    s = spec.resolved_sectors()
    width = 2.0 * np.pi / s
    sector_class = (np.arange(s) % c) + 1
    # a boundary ray at angle m*width is real iff the sectors on its two
    # sides have different classes
    real = sector_class != np.roll(sector_class, 1)
    angles = np.arange(s)[real] * width
    phi = np.arctan2(x[:, 1], x[:, 0])
    delta = phi[:, None] - angles
    along = np.cos(delta)
    # distance to the unit segment from the origin along each boundary ray:
    # the perpendicular r|sin| when the foot lies on the segment, else the
    # distance to the origin endpoint
    dist = np.where(along >= 0.0, r[:, None] * np.abs(np.sin(delta)),
                    r[:, None])
    return dist.min(axis=1)


def near_boundary(spec: GenSpec, features: np.ndarray,
                  delta: float = 0.1) -> np.ndarray:
    """Mask of points within `delta` of a class boundary."""
    return boundary_distance(spec, features) <= delta
