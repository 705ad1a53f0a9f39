"""Pure-Python/numpy implementations of the hot kernels.

Semantics are shared with ``_ckernels.pyx``; both modules must agree
split-for-split and move-for-move on the same inputs.
"""

from __future__ import annotations

import math

import numpy as np


def binary_entropy(k: float, n: float) -> float:
    if k <= 0 or k >= n:
        return 0.0
    p = k / n
    q = (n - k) / n
    return -(p * math.log2(p) + q * math.log2(q))


def _entropy_vec(k: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = k / n
        q = (n - k) / n
        h = -(p * np.log2(p) + q * np.log2(q))
    return np.where((k <= 0) | (k >= n), 0.0, h)


def split_sweep(xs: np.ndarray, ys: np.ndarray, order: np.ndarray, min_leaf: int):
    """Best ``feature <= threshold`` split of one tree node.

    ``xs`` holds the node's rows (m x F), ``ys`` their 0/1 labels and
    ``order`` the column-wise argsort of ``xs``.  A cut after sorted position
    ``pos`` is admissible when the values on both sides differ and each child
    has at least ``min_leaf`` rows or is pure.  Returns
    ``(feature, pos, gain)``; ``feature == -1`` when no cut has positive gain.
    Ties go to the lowest feature, then the lowest position.
    """
    m, nf = xs.shape
    if m < 2:
        return -1, -1, 0.0
    n_pos = float(ys.sum())
    h_parent = binary_entropy(n_pos, float(m))
    if h_parent == 0.0:
        return -1, -1, 0.0
    ys_sorted = ys[order].astype(np.float64)  # m x F
    xs_sorted = np.take_along_axis(xs, order, axis=0)
    kl = np.cumsum(ys_sorted, axis=0)[:-1]  # positives left of cut after pos
    nl = np.arange(1, m, dtype=np.float64)[:, None]
    nr = m - nl
    kr = n_pos - kl
    weighted = (nl * _entropy_vec(kl, nl) + nr * _entropy_vec(kr, nr)) / m
    gain = h_parent - weighted
    distinct = xs_sorted[1:] > xs_sorted[:-1]
    left_ok = (nl >= min_leaf) | (kl == 0) | (kl == nl)
    right_ok = (nr >= min_leaf) | (kr == 0) | (kr == nr)
    gain = np.where(distinct & left_ok & right_ok, gain, -np.inf)
    # column-major scan: feature first, then position
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    best_gain = float(flat[best])
    if not best_gain > 0.0:
        return -1, -1, 0.0
    f, pos = divmod(best, m - 1)
    return f, pos, best_gain


def move_nodes(indptr, indices, weights, degree, comm, tot, order, m2: float, resolution: float) -> int:
    """One local-moving pass of Louvain, visiting nodes in ``order``.

    ``comm`` and ``tot`` are updated in place.  A node's current community is
    scored first and only a strictly better neighbour community wins, so
    equal-gain alternatives never trigger a move.  Returns the move count.
    """
    ip = indptr.tolist()
    ix = indices.tolist()
    wt = weights.tolist()
    deg = degree.tolist()
    cm = comm.tolist()
    tt = tot.tolist()
    moves = 0
    for i in order.tolist():
        ci = cm[i]
        ki = deg[i]
        links: dict[int, float] = {ci: 0.0}
        for p in range(ip[i], ip[i + 1]):
            j = ix[p]
            if j == i:
                continue
            c = cm[j]
            links[c] = links.get(c, 0.0) + wt[p]
        tt[ci] -= ki
        best = ci
        best_gain = links[ci] - resolution * tt[ci] * ki / m2
        for c, w in links.items():
            g = w - resolution * tt[c] * ki / m2
            if g > best_gain:
                best, best_gain = c, g
        tt[best] += ki
        if best != ci:
            cm[i] = best
            moves += 1
    comm[:] = cm
    tot[:] = tt
    return moves
