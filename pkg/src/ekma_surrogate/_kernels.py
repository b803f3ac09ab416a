"""Compiled inner loops for tree growing and ensemble prediction.

Trees are stored as three flat arrays in depth-first preorder: ``feature``
(-1 marks a leaf), ``value`` (split threshold or leaf prediction) and
``right`` (tree-local index of the right child; the left child of node i is
always i + 1).
"""

import numpy as np
from numba import njit

# relative SSE margin below which two candidate splits count as tied
TIE_EPS = 1e-12


@njit(nogil=True, cache=True)
def _scan(xs, ycs, m, total_c, total_sq, tol, f, best_f, best_thr, best_sse):
    """Sweep thresholds of one feature whose first ``m`` values are sorted in ``xs``.

    ``ycs`` holds the matching centred targets.  A candidate replaces the
    incumbent only when its SSE is lower by more than ``tol``, so ties keep
    whatever was found first.
    """
    sl = 0.0
    for a in range(m - 1):
        sl += ycs[a]
        v0 = xs[a]
        v1 = xs[a + 1]
        if v0 < v1:
            nl = a + 1
            nr = m - nl
            sr = total_c - sl
            sse = total_sq - (sl * sl / nl + sr * sr / nr)
            if best_f < 0 or sse < best_sse - tol:
                best_sse = sse
                best_f = f
                thr = (v0 + v1) * 0.5
                if thr >= v1:  # adjacent floats: the midpoint rounded up
                    thr = v0
                best_thr = thr
    return best_f, best_thr, best_sse


@njit(nogil=True, cache=True)
def split_rows(X, y, rows, features, tie_eps):
    """Best (feature, threshold, sse) over midpoints of consecutive distinct values.

    Returns feature -1 when no candidate feature has two distinct values.
    Features are scanned in the given (ascending) order and thresholds in
    increasing order; a later candidate must beat the incumbent by more than
    ``tie_eps`` times the node SSE, so ties keep the lower feature index and
    then the smaller threshold.
    """
    n = rows.size
    mean = 0.0
    for a in range(n):
        mean += y[rows[a]]
    mean /= n
    yc = np.empty(n)
    total_c = 0.0
    total_sq = 0.0
    for a in range(n):
        d = y[rows[a]] - mean
        yc[a] = d
        total_c += d
        total_sq += d * d
    tol = tie_eps * total_sq

    best_f = -1
    best_thr = np.nan
    best_sse = np.inf
    vals = np.empty(n)
    xs = np.empty(n)
    ycs = np.empty(n)
    for fi in range(features.size):
        f = features[fi]
        for a in range(n):
            vals[a] = X[rows[a], f]
        order = np.argsort(vals, kind="mergesort")
        for a in range(n):
            xs[a] = vals[order[a]]
            ycs[a] = yc[order[a]]
        best_f, best_thr, best_sse = _scan(xs, ycs, n, total_c, total_sq, tol, f,
                                           best_f, best_thr, best_sse)
    return best_f, best_thr, best_sse


@njit(nogil=True, cache=True)
def grow(X, y, sample, keys, mtry, min_node_size, tie_eps, presorted):
    """Grow one tree on the rows listed in ``sample``.

    ``presorted[f]`` is the stable argsort of column f of X.  Every feature
    keeps the sample slots of each node sorted by value; a split stably
    partitions those lists, so no node ever re-sorts.  ``keys``
    holds one row of uniform draws per split attempt: the candidates of the
    d-th attempted node are the ``mtry`` smallest keys of row d.  Nodes are
    visited depth-first, left subtree before right, and consume key rows in
    that order.
    """
    n = sample.size
    p = X.shape[1]
    max_nodes = 2 * n - 1
    feature = np.full(max_nodes, -1, dtype=np.int32)
    value = np.zeros(max_nodes)
    right = np.full(max_nodes, -1, dtype=np.int32)

    n_rows = X.shape[0]
    xcol = np.empty((p, n))
    for f in range(p):
        for a in range(n):
            xcol[f, a] = X[sample[a], f]
    # slots of each source row, grouped by row in ascending slot order
    start = np.zeros(n_rows + 1, dtype=np.int64)
    for a in range(n):
        start[sample[a] + 1] += 1
    for r in range(n_rows):
        start[r + 1] += start[r]
    fill = start[:-1].copy()
    slots = np.empty(n, dtype=np.int64)
    for a in range(n):
        r = sample[a]
        slots[fill[r]] = a
        fill[r] += 1
    order = np.empty((p, n), dtype=np.int64)
    for f in range(p):
        k = 0
        for q in range(n_rows):
            r = presorted[f, q]
            for b in range(start[r], start[r + 1]):
                order[f, k] = slots[b]
                k += 1
    ys = np.empty(n)
    for a in range(n):
        ys[a] = y[sample[a]]

    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    xs = np.empty(n)
    ycs = np.empty(n)
    st_s = np.empty(n + 2, dtype=np.int64)
    st_e = np.empty(n + 2, dtype=np.int64)
    st_parent = np.empty(n + 2, dtype=np.int64)
    st_s[0] = 0
    st_e[0] = n
    st_parent[0] = -1
    sp = 1
    n_nodes = 0
    draw = 0

    while sp > 0:
        sp -= 1
        s = st_s[sp]
        e = st_e[sp]
        parent = st_parent[sp]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            right[parent] = node
        m = e - s

        first = ys[order[0, s]]
        acc = 0.0
        const = True
        for a in range(s, e):
            v = ys[order[0, a]]
            acc += v
            if v != first:
                const = False
        leaf = first if const else acc / m
        if m < 2 * min_node_size or const:
            value[node] = leaf
            continue

        mean = acc / m
        total_c = 0.0
        total_sq = 0.0
        for a in range(s, e):
            d = ys[order[0, a]] - mean
            total_c += d
            total_sq += d * d
        tol = tie_eps * total_sq

        cand = np.sort(np.argsort(keys[draw])[:mtry])
        draw += 1
        best_f = -1
        best_thr = np.nan
        best_sse = np.inf
        for ci in range(cand.size):
            f = cand[ci]
            for a in range(m):
                pos = order[f, s + a]
                xs[a] = xcol[f, pos]
                ycs[a] = ys[pos] - mean
            best_f, best_thr, best_sse = _scan(xs, ycs, m, total_c, total_sq, tol, f,
                                               best_f, best_thr, best_sse)
        if best_f < 0:
            value[node] = leaf
            continue

        nl = 0
        for a in range(s, e):
            pos = order[best_f, a]
            if xcol[best_f, pos] <= best_thr:
                goes_left[pos] = True
                nl += 1
        for g in range(p):
            li = s
            ri = 0
            for a in range(s, e):
                pos = order[g, a]
                if goes_left[pos]:
                    order[g, li] = pos
                    li += 1
                else:
                    buf[ri] = pos
                    ri += 1
            for a in range(ri):
                order[g, li + a] = buf[a]
        for a in range(s, s + nl):
            goes_left[order[0, a]] = False

        feature[node] = best_f
        value[node] = best_thr
        st_s[sp] = s + nl
        st_e[sp] = e
        st_parent[sp] = node
        sp += 1
        st_s[sp] = s
        st_e[sp] = s + nl
        st_parent[sp] = -1
        sp += 1

    return feature[:n_nodes].copy(), value[:n_nodes].copy(), right[:n_nodes].copy()


@njit(nogil=True, cache=True)
def predict_flat(X, feature, value, right, roots, out):
    """Mean of tree outputs per row, summed in ascending tree order.

    Trees form the outer loop so one tree stays cache-resident while all rows
    pass through it.  The mean is clamped to the per-row [min, max] over
    trees, which it can only leave through rounding.
    """
    n = X.shape[0]
    n_trees = roots.size
    acc = np.zeros(n)
    lo = np.full(n, np.inf)
    hi = np.full(n, -np.inf)
    for t in range(n_trees):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= value[node]:
                    node += 1
                else:
                    node = root + right[node]
            v = value[node]
            acc[i] += v
            if v < lo[i]:
                lo[i] = v
            if v > hi[i]:
                hi[i] = v
    for i in range(n):
        p = acc[i] / n_trees
        if p < lo[i]:
            p = lo[i]
        elif p > hi[i]:
            p = hi[i]
        out[i] = p


@njit(nogil=True, cache=True)
def predict_each(X, feature, value, right, roots, out):
    """Per-tree outputs into ``out`` of shape (n_trees, n_rows)."""
    for t in range(roots.size):
        root = roots[t]
        for i in range(X.shape[0]):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= value[node]:
                    node += 1
                else:
                    node = root + right[node]
            out[t, i] = value[node]
