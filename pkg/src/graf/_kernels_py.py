"""Pure-numpy kernels: the hot inner loops of tree growth and traversal.

This module mirrors the compiled extension (_kernels.pyx) exactly. Both
implementations accumulate hyperplane scores feature-by-feature from the
left and add the bias last, and accumulate the impurity sums class-by-class
from class 0 up. That fixed order makes the two backends produce
bit-identical floats, which the test suite checks.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def split_partitions(X, order, labels, totals, starts, lens, w, bias):
    """Apply one hyperplane to every listed partition span.

    Each partition is the slice ``order[starts[p] : starts[p]+lens[p]]``.
    Member rows of a dichotomized span are stably regrouped in place: rows
    with bit 0 first, then rows with bit 1 (relative order preserved within
    each side). Spans the hyperplane does not dichotomize are untouched.

    Parameters
    ----------
    X : (N, M) float64, C-contiguous
        Subspace feature block.
    order : (N,) int64
        Row permutation; partitions are contiguous spans of it. Mutated.
    labels : (N,) int64
        Zero-based class per row of X.
    totals : (C,) float64
        Per-class totals of the training set (denominators of the impurity
        class ratios); zero entries are skipped.
    starts, lens : (P,) int64
        Span table of the partitions to split.
    w : (M,) float64
    bias : float

    Returns
    -------
    n_bit1 : (P,) int64
        Members of each span scoring > 0. A span is dichotomized iff
        0 < n_bit1 < lens[p].
    counts : (P, 2, C) int64
        Per-child class counts; zero rows for non-dichotomized spans.
    z : (P, 2) float64
        Per-child impurity; zero for non-dichotomized spans.
    splittable : (P, 2) uint8
        1 where a child has at least one non-constant feature.
    """
    P = starts.shape[0]
    C = totals.shape[0]
    M = X.shape[1]

    ends = np.cumsum(lens)
    total = int(ends[-1])
    flat_starts = ends - lens
    # flat position -> position in `order`
    pos = (np.arange(total, dtype=np.int64)
           - np.repeat(flat_starts, lens)
           + np.repeat(starts, lens))
    seg = np.repeat(np.arange(P, dtype=np.int64), lens)
    rows = order[pos]

    block = X[rows]
    acc = np.zeros(total, dtype=np.float64)
    for j in range(M):
        acc += w[j] * block[:, j]
    acc += bias
    bits = acc > 0.0

    n1 = np.add.reduceat(bits.astype(np.int64), flat_starts)
    n0 = lens - n1
    dicho = (n1 > 0) & (n1 < lens)

    # stable regroup: within each span, bit-0 rows then bit-1 rows
    perm = np.argsort(seg * 2 + bits, kind="stable")
    rows_sorted = rows[perm]
    order[pos] = rows_sorted

    # per-child flat layout: child (p,0) occupies n0[p] rows then (p,1) n1[p]
    sizes2 = np.empty(2 * P, dtype=np.int64)
    sizes2[0::2] = n0
    sizes2[1::2] = n1
    ends2 = np.cumsum(sizes2)
    starts2 = ends2 - sizes2

    child_of = np.repeat(np.arange(2 * P, dtype=np.int64), sizes2)
    counts = np.bincount(
        child_of * C + labels[rows_sorted], minlength=2 * P * C
    ).reshape(P, 2, C)

    s1 = np.zeros((P, 2), dtype=np.float64)
    s2 = np.zeros((P, 2), dtype=np.float64)
    for c in range(C):
        t = totals[c]
        if t > 0:
            r = counts[:, :, c] / t
            s1 += r
            s2 += r * r
    n2 = sizes2.reshape(P, 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (1.0 - s2 / (s1 * s1)) * n2

    splittable = np.zeros(2 * P, dtype=np.uint8)
    nonempty = sizes2 > 0
    if nonempty.any():
        block_sorted = block[perm]
        mins = np.minimum.reduceat(block_sorted, starts2[nonempty], axis=0)
        maxs = np.maximum.reduceat(block_sorted, starts2[nonempty], axis=0)
        splittable[nonempty] = (mins != maxs).any(axis=1)
    splittable = splittable.reshape(P, 2)

    # non-dichotomized spans report no child statistics
    nd = ~dicho
    if nd.any():
        counts[nd] = 0
        z[nd] = 0.0
        splittable[nd] = 0
    return n1, counts, z, splittable


def dichotomizes(X, order, start, length, w, bias):
    """True if the hyperplane puts at least one span member on each side."""
    rows = order[start:start + length]
    acc = np.zeros(length, dtype=np.float64)
    for j in range(X.shape[1]):
        acc += w[j] * X[rows, j]
    acc += bias
    bits = acc > 0.0
    return bool(bits.any() and not bits.all())


def assign_leaves(X, node_step, node_child0, node_child1, node_leaf,
                  weights, biases):
    """Map each row of X (subspace coordinates) to its leaf ordinal.

    Nodes descend from the root (node 0): an internal node at 1-based step t
    sends a row to child1 when w_t . x + b_t > 0, else to child0.
    """
    n = X.shape[0]
    M = X.shape[1]
    out = np.empty(n, dtype=np.int64)
    cur = np.zeros(n, dtype=np.int64)
    pending = np.arange(n, dtype=np.int64)
    while pending.size:
        nodes = cur[pending]
        at_leaf = node_leaf[nodes] >= 0
        if at_leaf.any():
            done = pending[at_leaf]
            out[done] = node_leaf[cur[done]]
            pending = pending[~at_leaf]
            if pending.size == 0:
                break
            nodes = cur[pending]
        t = node_step[nodes].astype(np.int64) - 1
        wt = weights[t]
        xp = X[pending]
        acc = np.zeros(pending.size, dtype=np.float64)
        for j in range(M):
            acc += wt[:, j] * xp[:, j]
        acc += biases[t]
        bit = acc > 0.0
        cur[pending] = np.where(bit, node_child1[nodes], node_child0[nodes])
    return out
