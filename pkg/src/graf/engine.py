"""Single-tree growth by globally extended random hyperplanes.

The growth loop keeps a pool of impure partitions. Each iteration draws a
random hyperplane from the value range of the most impure partition and
applies it to *every* impure partition at once; partitions it fails to
dichotomize simply skip that step (their leaf codes end up shorter). The
loop ends when every partition is pure (single class) or unsplittable.

Partitions are contiguous spans of a row-permutation array, so splitting is
a stable in-place regroup and membership never needs per-partition index
lists until leaves are finalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .dataset import Dataset
from .errors import DataError, InternalError, UsageError

MAX_RETRIES = 32


@dataclass(frozen=True)
class SubspaceView:
    """Sorted, duplicate-free feature column indices (0-based)."""

    columns: np.ndarray

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.int64)
        if cols.ndim != 1 or cols.size < 1:
            raise UsageError("subspace needs at least one feature index")
        if np.unique(cols).size != cols.size:
            raise UsageError("subspace columns must be distinct")
        if not np.array_equal(np.sort(cols), cols):
            cols = np.sort(cols)
        if cols[0] < 0:
            raise UsageError("subspace columns must be non-negative")
        object.__setattr__(self, "columns", cols)

    @property
    def size(self) -> int:
        return int(self.columns.size)


@dataclass(frozen=True)
class Hyperplane:
    """Oblique split: bit(x) = 1 iff w . x + bias > 0 (strict).

    The bias is the negated weighted mean of the source partition, so the
    partition's mean point always scores exactly 0 and lands on side 0.
    """

    weights: np.ndarray
    bias: float


@dataclass
class Partition:
    """A sample group tracked by the growth loop (exposed for inspection)."""

    sample_indices: np.ndarray
    state: str  # impure | pure | unsplittable
    created_step: int
    finalized_step: int | None = None
    class_counts: np.ndarray | None = None


@dataclass
class LeafRecord:
    """A finalized partition: code, membership, posterior, and the global
    hyperplane count at the step it became final."""

    code: str
    weight_count: int
    state: str
    node_id: int
    posterior: np.ndarray | None = None
    class_counts: np.ndarray | None = None
    sample_indices: np.ndarray | None = None


@dataclass
class TreeInstance:
    """One grown tree: hyperplanes, node structure, and leaves.

    node arrays are parallel, indexed by node id (root = 0). Internal nodes
    carry the 1-based step of the hyperplane that split them; leaves carry
    their ordinal in `leaves` and -1 children.
    """

    n_features: int
    n_classes: int
    n_samples: int
    subspace: np.ndarray
    weights: np.ndarray  # (S, M)
    biases: np.ndarray  # (S,)
    node_step: np.ndarray
    node_child0: np.ndarray
    node_child1: np.ndarray
    node_leaf: np.ndarray
    leaves: list[LeafRecord]
    max_split_violation: float = 0.0
    posterior_matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_hyperplanes(self) -> int:
        return int(self.biases.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.node_step.shape[0])

    def weight_counts(self) -> np.ndarray:
        return np.array([lf.weight_count for lf in self.leaves], dtype=np.int64)

    def refresh_posterior_matrix(self) -> None:
        self.posterior_matrix = np.ascontiguousarray(
            np.vstack([lf.posterior for lf in self.leaves])
        )


def subspace_block(features: np.ndarray, columns: np.ndarray) -> np.ndarray:
    """Contiguous copy of the selected feature columns."""
    return np.ascontiguousarray(features[:, columns])


def _block_stats(block: np.ndarray):
    """Per-feature (min, max, mean) of a non-empty sample block."""
    mins = block.min(axis=0)
    maxs = block.max(axis=0)
    mean = np.add.reduce(block, axis=0) / block.shape[0]
    return mins, maxs, mean


def partition_stats(dataset: Dataset, part, sub: SubspaceView):
    """Per-feature min/max/mean of a partition restricted to a subspace."""
    idx = part.sample_indices if isinstance(part, Partition) else np.asarray(part)
    if idx.size == 0:
        raise UsageError("partition_stats: empty partition")
    cols = sub.columns if isinstance(sub, SubspaceView) else np.asarray(sub)
    block = dataset.features[np.ix_(idx, cols)]
    return _block_stats(block)


def _draw_arrays(mins, maxs, mean, rng):
    """One weight draw plus its mean-centered bias.

    Weights are uniform on [min+eps, max-eps] per feature; a feature whose
    interval collapses gets the constant weight min (its contribution is
    cancelled by the bias). Exactly M uniforms are consumed per call so the
    stream position never depends on which features are degenerate.
    """
    m = mins.shape[0]
    u = rng.random(m)
    span = maxs - mins
    eps = 1e-9 * np.maximum(1.0, np.abs(span))
    w = (mins + eps) + (span - 2.0 * eps) * u
    collapsed = span <= 2.0 * eps
    if collapsed.any():
        w = np.where(collapsed, mins, w)
    s = 0.0
    for j in range(m):
        s += w[j] * mean[j]
    return w, -s


def draw_hyperplane(stats, rng) -> Hyperplane:
    """Draw a hyperplane from partition stats (min, max, mean)."""
    mins, maxs, mean = (np.asarray(a, dtype=np.float64) for a in stats)
    w, b = _draw_arrays(mins, maxs, mean, rng)
    return Hyperplane(weights=w, bias=b)


def assign_bit(h: Hyperplane, x) -> int:
    """Side of the hyperplane for a subspace-restricted sample (strict >)."""
    acc = 0.0
    for j in range(len(h.weights)):
        acc += h.weights[j] * x[j]
    acc += h.bias
    return 1 if acc > 0.0 else 0


def impurity(class_counts, class_totals) -> float:
    """Size-weighted impurity of a partition.

    With r_c = count_c / total_c over classes with total_c > 0:
    Z = (1 - sum(r_c^2) / (sum(r_c))^2) * n. Zero iff one class is present.
    """
    counts = np.asarray(class_counts)
    totals = np.asarray(class_totals, dtype=np.float64)
    n = int(counts.sum())
    if n == 0:
        raise UsageError("impurity: empty partition")
    s1 = 0.0
    s2 = 0.0
    for c in range(counts.shape[0]):
        if totals[c] > 0:
            r = counts[c] / totals[c]
            s1 = s1 + r
            s2 = s2 + r * r
    if s1 == 0.0:
        raise UsageError("impurity: all member classes have zero totals")
    return (1.0 - s2 / (s1 * s1)) * n


def posteriors_from_counts(counts: np.ndarray, class_totals, n_total: int):
    """Leaf posteriors: within-leaf class fractions reweighted by inverse
    class frequency (n_total / total_c) and renormalized. Rows of `counts`
    are leaves; zero-total classes contribute nothing."""
    counts = np.asarray(counts, dtype=np.float64)
    totals = np.asarray(class_totals, dtype=np.float64)
    single = counts.ndim == 1
    if single:
        counts = counts[None, :]
    sizes = counts.sum(axis=1, keepdims=True)
    fhat = counts / sizes
    inv_freq = np.divide(
        float(n_total), totals, out=np.zeros_like(totals), where=totals > 0
    )
    g = fhat * inv_freq
    out = g / g.sum(axis=1, keepdims=True)
    return out[0] if single else out


def grow_tree(dataset: Dataset, sub, rng, *, min_samples_split: int = 2,
              max_retries: int = MAX_RETRIES) -> TreeInstance:
    """Grow one tree on the dataset restricted to a feature subspace.

    Returns a finalized tree with pure/unsplittable leaves, posteriors, and
    per-leaf weight counts (global hyperplane count at finalization).
    `max_split_violation` records the largest observed gap
    Z(child0)+Z(child1)-Z(parent) over all applied splits; under balanced
    class totals it stays at float-noise level.
    """
    if min_samples_split < 2:
        raise UsageError("min_samples_split must be at least 2")
    if not isinstance(sub, SubspaceView):
        sub = SubspaceView(np.asarray(sub))
    if sub.columns[-1] >= dataset.n_features:
        raise UsageError("subspace column out of range")

    kern = backend.kernels()
    n = dataset.n_samples
    n_classes = dataset.n_classes
    xsub = subspace_block(dataset.features, sub.columns)
    order = np.arange(n, dtype=np.int64)
    labels0 = dataset.labels - 1
    totals_f = dataset.class_totals.astype(np.float64)

    cap = 2 * n + 2
    node_step = np.zeros(cap, dtype=np.int32)
    node_child0 = np.full(cap, -1, dtype=np.int32)
    node_child1 = np.full(cap, -1, dtype=np.int32)
    node_leaf = np.full(cap, -1, dtype=np.int32)
    n_nodes = 1

    weights_acc: list[np.ndarray] = []
    biases_acc: list[float] = []

    # leaf finalization events, batched as arrays
    ev_node: list[np.ndarray] = []
    ev_start: list[np.ndarray] = []
    ev_len: list[np.ndarray] = []
    ev_step: list[np.ndarray] = []
    ev_pure: list[np.ndarray] = []
    ev_counts: list[np.ndarray] = []

    def finalize(nodes, starts, lens, step, pure, counts):
        ev_node.append(np.atleast_1d(nodes).astype(np.int64))
        ev_start.append(np.atleast_1d(starts).astype(np.int64))
        ev_len.append(np.atleast_1d(lens).astype(np.int64))
        ev_step.append(np.full(np.atleast_1d(nodes).size, step, dtype=np.int64))
        ev_pure.append(np.atleast_1d(pure))
        ev_counts.append(counts.reshape(-1, n_classes))

    root_counts = dataset.class_totals.copy()
    root_z = impurity(root_counts, totals_f)
    root_splittable = bool((xsub.min(axis=0) != xsub.max(axis=0)).any())

    step = 0
    max_violation = 0.0

    if root_z == 0.0:
        finalize(0, 0, n, 0, np.array([True]), root_counts)
        imp_start = np.empty(0, dtype=np.int64)
    elif not root_splittable or n < min_samples_split:
        finalize(0, 0, n, 0, np.array([False]), root_counts)
        imp_start = np.empty(0, dtype=np.int64)
    else:
        imp_start = np.zeros(1, dtype=np.int64)
        imp_len = np.full(1, n, dtype=np.int64)
        imp_node = np.zeros(1, dtype=np.int64)
        imp_z = np.full(1, root_z, dtype=np.float64)
        imp_counts = root_counts[None, :].copy()

    while imp_start.size:
        k = int(np.argmax(imp_z))
        s = int(imp_start[k])
        length = int(imp_len[k])
        block = xsub[order[s:s + length]]
        mins, maxs, mean = _block_stats(block)

        w = b = None
        for _ in range(max_retries):
            w_try, b_try = _draw_arrays(mins, maxs, mean, rng)
            if kern.dichotomizes(xsub, order, s, length, w_try, b_try):
                w, b = w_try, b_try
                break
        if w is None:
            # no draw separated the target partition: final as-is
            finalize(imp_node[k], s, length, step, np.array([False]),
                     imp_counts[k])
            keep = np.ones(imp_start.size, dtype=bool)
            keep[k] = False
            imp_start = imp_start[keep]
            imp_len = imp_len[keep]
            imp_node = imp_node[keep]
            imp_z = imp_z[keep]
            imp_counts = imp_counts[keep]
            continue

        step += 1
        weights_acc.append(w)
        biases_acc.append(float(b))

        n1, counts2, z2, split2 = kern.split_partitions(
            xsub, order, labels0, totals_f, imp_start, imp_len, w, b)
        n0 = imp_len - n1
        dicho = (n1 > 0) & (n0 > 0)
        if not dicho[k]:
            raise InternalError("accepted hyperplane failed to dichotomize "
                                "the partition it was drawn from")

        d_idx = np.flatnonzero(dicho)
        nd_idx = np.flatnonzero(~dicho)
        m = d_idx.size

        gap = (z2[d_idx, 0] + z2[d_idx, 1]) - imp_z[d_idx]
        g = float(gap.max())
        if g > max_violation:
            max_violation = g

        parents = imp_node[d_idx]
        child0 = n_nodes + 2 * np.arange(m, dtype=np.int64)
        child1 = child0 + 1
        node_step[parents] = step
        node_child0[parents] = child0
        node_child1[parents] = child1
        n_nodes += 2 * m

        ch_node = np.empty(2 * m, dtype=np.int64)
        ch_node[0::2] = child0
        ch_node[1::2] = child1
        ch_start = np.empty(2 * m, dtype=np.int64)
        ch_start[0::2] = imp_start[d_idx]
        ch_start[1::2] = imp_start[d_idx] + n0[d_idx]
        ch_len = np.empty(2 * m, dtype=np.int64)
        ch_len[0::2] = n0[d_idx]
        ch_len[1::2] = n1[d_idx]
        ch_z = z2[d_idx].ravel()
        ch_counts = counts2[d_idx].reshape(2 * m, n_classes)
        ch_split = split2[d_idx].ravel().astype(bool)

        ch_pure = ch_z == 0.0
        ch_impure = (~ch_pure) & ch_split & (ch_len >= min_samples_split)
        ch_final = ~ch_impure
        if ch_final.any():
            finalize(ch_node[ch_final], ch_start[ch_final], ch_len[ch_final],
                     step, ch_pure[ch_final], ch_counts[ch_final])

        # survivors keep creation order; new impure children append after
        imp_start = np.concatenate([imp_start[nd_idx], ch_start[ch_impure]])
        imp_len = np.concatenate([imp_len[nd_idx], ch_len[ch_impure]])
        imp_node = np.concatenate([imp_node[nd_idx], ch_node[ch_impure]])
        imp_z = np.concatenate([imp_z[nd_idx], ch_z[ch_impure]])
        imp_counts = np.concatenate([imp_counts[nd_idx], ch_counts[ch_impure]])

    lf_node = np.concatenate(ev_node)
    lf_start = np.concatenate(ev_start)
    lf_len = np.concatenate(ev_len)
    lf_step = np.concatenate(ev_step)
    lf_pure = np.concatenate(ev_pure)
    lf_counts = np.concatenate(ev_counts)

    by_node = np.argsort(lf_node)
    node_leaf[lf_node[by_node]] = np.arange(by_node.size, dtype=np.int32)

    if weights_acc:
        weights = np.ascontiguousarray(np.vstack(weights_acc))
        biases = np.array(biases_acc, dtype=np.float64)
    else:
        weights = np.zeros((0, sub.size), dtype=np.float64)
        biases = np.zeros(0, dtype=np.float64)

    tree = TreeInstance(
        n_features=dataset.n_features,
        n_classes=n_classes,
        n_samples=n,
        subspace=sub.columns,
        weights=weights,
        biases=biases,
        node_step=node_step[:n_nodes].copy(),
        node_child0=node_child0[:n_nodes].copy(),
        node_child1=node_child1[:n_nodes].copy(),
        node_leaf=node_leaf[:n_nodes].copy(),
        leaves=[],
        max_split_violation=max_violation,
    )

    codes = leaf_codes(tree)
    posts = posteriors_from_counts(lf_counts[by_node], dataset.class_totals, n)
    for q in range(by_node.size):
        e = by_node[q]
        s0 = int(lf_start[e])
        tree.leaves.append(LeafRecord(
            code=codes[q],
            weight_count=int(lf_step[e]),
            state="pure" if bool(lf_pure[e]) else "unsplittable",
            node_id=int(lf_node[e]),
            posterior=posts[q],
            class_counts=lf_counts[e].copy(),
            sample_indices=order[s0:s0 + int(lf_len[e])].copy(),
        ))
    tree.refresh_posterior_matrix()
    return tree


def leaf_codes(tree: TreeInstance) -> list[str]:
    """Per-leaf bit strings: one bit per hyperplane that split the leaf's
    ancestors, in step order (skipped steps emit nothing)."""
    codes = [""] * int((tree.node_leaf >= 0).sum())
    stack = [(0, "")]
    while stack:
        node, prefix = stack.pop()
        leaf = tree.node_leaf[node]
        if leaf >= 0:
            codes[leaf] = prefix
        else:
            stack.append((int(tree.node_child1[node]), prefix + "1"))
            stack.append((int(tree.node_child0[node]), prefix + "0"))
    return codes


def leaf_ordinals(tree: TreeInstance, features: np.ndarray) -> np.ndarray:
    """Leaf ordinal reached by each row of a full-dimensional matrix."""
    if features.ndim != 2 or features.shape[1] != tree.n_features:
        raise DataError(
            f"expected {tree.n_features} feature columns, "
            f"got {features.shape[1] if features.ndim == 2 else features.ndim}"
        )
    xsub = subspace_block(features, tree.subspace)
    return backend.kernels().assign_leaves(
        xsub, tree.node_step, tree.node_child0, tree.node_child1,
        tree.node_leaf, tree.weights, tree.biases)


def traverse(tree: TreeInstance, x) -> LeafRecord:
    """Descend from the root to the leaf for one full-dimensional sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != tree.n_features:
        raise DataError(f"expected {tree.n_features} features")
    if not np.isfinite(x).all():
        raise DataError("sample contains non-finite values")
    ordinal = leaf_ordinals(tree, x[None, :])[0]
    return tree.leaves[int(ordinal)]


def leaf_posteriors(tree: TreeInstance, dataset: Dataset) -> TreeInstance:
    """Recompute leaf memberships and posteriors from a dataset.

    Useful after loading a model without stored memberships; for the
    training set it reproduces what grow_tree already filled in.
    """
    if dataset.n_classes != tree.n_classes:
        raise UsageError("dataset class count does not match tree")
    ords = leaf_ordinals(tree, dataset.features)
    q = len(tree.leaves)
    counts = np.bincount(
        ords * tree.n_classes + (dataset.labels - 1),
        minlength=q * tree.n_classes,
    ).reshape(q, tree.n_classes)
    if (counts.sum(axis=1) == 0).any():
        raise UsageError("a leaf received no samples; posteriors undefined")
    posts = posteriors_from_counts(counts, dataset.class_totals,
                                   dataset.n_samples)
    sort_idx = np.argsort(ords, kind="stable")
    bounds = np.searchsorted(ords[sort_idx], np.arange(q))
    for i, lf in enumerate(tree.leaves):
        lf.class_counts = counts[i]
        lf.posterior = posts[i]
        end = bounds[i + 1] if i + 1 < q else ords.size
        lf.sample_indices = np.sort(sort_idx[bounds[i]:end])
    tree.refresh_posterior_matrix()
    return tree
