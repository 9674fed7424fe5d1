# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for tree growth and traversal.

Float accumulation order matches the numpy fallback (_kernels_py) exactly:
scores sum feature-by-feature from the left with the bias added last, and
the impurity sums run class-by-class from class 0. Together with
-ffp-contract=off at compile time this keeps both backends bit-identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IS_COMPILED = True


def split_partitions(double[:, ::1] X, long long[::1] order,
                     long long[::1] labels, double[::1] totals,
                     long long[::1] starts, long long[::1] lens,
                     double[::1] w, double bias):
    """See _kernels_py.split_partitions; same contract, same results."""
    cdef Py_ssize_t P = starts.shape[0]
    cdef Py_ssize_t C = totals.shape[0]
    cdef Py_ssize_t M = X.shape[1]
    cdef Py_ssize_t N = X.shape[0]

    n1_arr = np.zeros(P, dtype=np.int64)
    counts_arr = np.zeros((P, 2, C), dtype=np.int64)
    z_arr = np.zeros((P, 2), dtype=np.float64)
    split_arr = np.zeros((P, 2), dtype=np.uint8)
    buf_arr = np.empty(N, dtype=np.int64)
    bits_arr = np.empty(N, dtype=np.uint8)

    cdef long long[::1] n1 = n1_arr
    cdef long long[:, :, ::1] counts = counts_arr
    cdef double[:, ::1] z = z_arr
    cdef unsigned char[:, ::1] split = split_arr
    cdef long long[::1] buf = buf_arr
    cdef unsigned char[::1] bits = bits_arr

    cdef Py_ssize_t p, t, j, c, side, lo, hi
    cdef long long s, L, n_one, k0, k1, i, cnt
    cdef double acc, r, s1, s2, mn, mx
    cdef unsigned char b, any_split

    with nogil:
        for p in range(P):
            s = starts[p]
            L = lens[p]
            n_one = 0
            for t in range(s, s + L):
                i = order[t]
                acc = 0.0
                for j in range(M):
                    acc = acc + w[j] * X[i, j]
                acc = acc + bias
                if acc > 0.0:
                    b = 1
                else:
                    b = 0
                bits[t] = b
                n_one += b
            n1[p] = n_one
            if n_one == 0 or n_one == L:
                continue

            # stable regroup: bit-0 rows then bit-1 rows
            k0 = s
            k1 = s + (L - n_one)
            for t in range(s, s + L):
                if bits[t]:
                    buf[k1] = order[t]
                    k1 += 1
                else:
                    buf[k0] = order[t]
                    k0 += 1
            for t in range(s, s + L):
                order[t] = buf[t]

            # per-child class counts
            for t in range(s, s + L - n_one):
                counts[p, 0, labels[order[t]]] += 1
            for t in range(s + L - n_one, s + L):
                counts[p, 1, labels[order[t]]] += 1

            # per-child impurity and splittability
            for side in range(2):
                if side == 0:
                    lo = s
                    hi = s + L - n_one
                else:
                    lo = s + L - n_one
                    hi = s + L
                s1 = 0.0
                s2 = 0.0
                for c in range(C):
                    if totals[c] > 0:
                        cnt = counts[p, side, c]
                        r = cnt / totals[c]
                        s1 = s1 + r
                        s2 = s2 + r * r
                z[p, side] = (1.0 - s2 / (s1 * s1)) * (hi - lo)

                any_split = 0
                for j in range(M):
                    mn = X[order[lo], j]
                    mx = mn
                    for t in range(lo + 1, hi):
                        r = X[order[t], j]
                        if r < mn:
                            mn = r
                        elif r > mx:
                            mx = r
                    if mn != mx:
                        any_split = 1
                        break
                split[p, side] = any_split

    return n1_arr, counts_arr, z_arr, split_arr


def dichotomizes(double[:, ::1] X, long long[::1] order,
                 long long start, long long length,
                 double[::1] w, double bias):
    """True if the hyperplane puts at least one span member on each side."""
    cdef Py_ssize_t M = X.shape[1]
    cdef Py_ssize_t t, j
    cdef long long i
    cdef double acc
    cdef bint seen0 = 0, seen1 = 0
    with nogil:
        for t in range(start, start + length):
            i = order[t]
            acc = 0.0
            for j in range(M):
                acc = acc + w[j] * X[i, j]
            acc = acc + bias
            if acc > 0.0:
                seen1 = 1
            else:
                seen0 = 1
            if seen0 and seen1:
                break
    return bool(seen0 and seen1)


def assign_leaves(double[:, ::1] X, int[::1] node_step, int[::1] node_child0,
                  int[::1] node_child1, int[::1] node_leaf,
                  double[:, ::1] weights, double[::1] biases):
    """Map each row of X (subspace coordinates) to its leaf ordinal."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t M = X.shape[1]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int node, t
    cdef double acc
    with nogil:
        for i in range(n):
            node = 0
            while node_leaf[node] < 0:
                t = node_step[node] - 1
                acc = 0.0
                for j in range(M):
                    acc = acc + weights[t, j] * X[i, j]
                acc = acc + biases[t]
                if acc > 0.0:
                    node = node_child1[node]
                else:
                    node = node_child0[node]
            out[i] = node_leaf[node]
    return out_arr
