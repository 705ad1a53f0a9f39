# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: decision-tree split sweep and Louvain local moves.

Mirrors ``_pykernels``; see that module for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, INFINITY

cnp.import_array()


cdef inline double _entropy(double k, double n) noexcept nogil:
    cdef double p, q
    if k <= 0 or k >= n:
        return 0.0
    p = k / n
    q = (n - k) / n
    return -(p * log2(p) + q * log2(q))


def binary_entropy(double k, double n):
    return _entropy(k, n)


def split_sweep(const double[:, :] xs, ys, const cnp.intp_t[:, :] order, int min_leaf):
    cdef Py_ssize_t m = xs.shape[0]
    cdef Py_ssize_t nf = xs.shape[1]
    cdef Py_ssize_t f, pos, r, r_next
    cdef double n_pos = 0.0, h_parent, kl, nl, nr, kr, gain, best_gain = 0.0
    cdef Py_ssize_t best_f = -1, best_pos = -1
    cdef bint left_ok, right_ok
    cdef cnp.int64_t[:] yv = np.ascontiguousarray(ys, dtype=np.int64)

    if m < 2:
        return -1, -1, 0.0
    for r in range(m):
        n_pos += yv[r]
    h_parent = _entropy(n_pos, <double>m)
    if h_parent == 0.0:
        return -1, -1, 0.0
    with nogil:
        for f in range(nf):
            kl = 0.0
            for pos in range(m - 1):
                r = order[pos, f]
                r_next = order[pos + 1, f]
                kl += yv[r]
                if not xs[r_next, f] > xs[r, f]:
                    continue
                nl = pos + 1
                nr = m - nl
                kr = n_pos - kl
                left_ok = nl >= min_leaf or kl == 0 or kl == nl
                right_ok = nr >= min_leaf or kr == 0 or kr == nr
                if not (left_ok and right_ok):
                    continue
                gain = h_parent - (nl * _entropy(kl, nl) + nr * _entropy(kr, nr)) / m
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_pos = pos
    if best_f < 0:
        return -1, -1, 0.0
    return int(best_f), int(best_pos), best_gain


def move_nodes(const cnp.intp_t[:] indptr, const cnp.intp_t[:] indices,
               const double[:] weights, const double[:] degree,
               cnp.intp_t[:] comm, double[:] tot, const cnp.intp_t[:] order,
               double m2, double resolution):
    cdef Py_ssize_t n = degree.shape[0]
    cdef double[:] links = np.zeros(n, dtype=np.float64)
    cdef cnp.intp_t[:] touched = np.empty(n + 1, dtype=np.intp)
    cdef cnp.uint8_t[:] seen = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t idx, p, i, j, c, ci, best, n_touched, t
    cdef double ki, g, best_gain
    cdef long moves = 0

    with nogil:
        for idx in range(order.shape[0]):
            i = order[idx]
            ci = comm[i]
            ki = degree[i]
            touched[0] = ci
            seen[ci] = 1
            links[ci] = 0.0
            n_touched = 1
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j == i:
                    continue
                c = comm[j]
                if not seen[c]:
                    seen[c] = 1
                    links[c] = 0.0
                    touched[n_touched] = c
                    n_touched += 1
                links[c] += weights[p]
            tot[ci] -= ki
            best = ci
            best_gain = links[ci] - resolution * tot[ci] * ki / m2
            for t in range(1, n_touched):
                c = touched[t]
                g = links[c] - resolution * tot[c] * ki / m2
                if g > best_gain:
                    best = c
                    best_gain = g
            tot[best] += ki
            if best != ci:
                comm[i] = best
                moves += 1
            for t in range(n_touched):
                seen[touched[t]] = 0
    return moves
