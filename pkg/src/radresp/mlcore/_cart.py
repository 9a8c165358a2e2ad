"""Compiled CART kernel shared by the tree, forest and boosting learners.

Splits minimise the summed squared error of the children. For 0/1 targets
this is the Gini criterion (n * p * (1 - p) is half the weighted Gini
impurity), so one kernel serves classification trees and the regression trees
inside gradient boosting.
"""
import numpy as np
from numba import njit

_EPS = 1e-12


@njit(cache=True)
def _grow_into(X, y, idx, max_depth, min_leaf, n_try, keys,
               feature, threshold, left, right, value, leaf_of_row,
               order, stack, xs, ys, cand):
    n_rows = idx.shape[0]
    n_feat = X.shape[1]
    max_nodes = keys.shape[0]
    for k in range(max_nodes):
        feature[k] = -1
        left[k] = -1
        right[k] = -1
        threshold[k] = 0.0
        value[k] = 0.0
    for r in range(n_rows):
        order[r] = r

    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_rows
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        stop = stack[top, 2]
        depth = stack[top, 3]
        m = stop - start

        s = 0.0
        s2 = 0.0
        for r in range(start, stop):
            t = y[idx[order[r]]]
            s += t
            s2 += t * t
        value[node] = s / m
        parent_sse = s2 - s * s / m

        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        if depth < max_depth and m >= 2 * min_leaf and parent_sse > _EPS and n_nodes + 2 <= max_nodes:
            # candidate features: n_try smallest keys, then ascending index
            n_cand = n_feat if n_try >= n_feat else n_try
            if n_try >= n_feat:
                for f in range(n_feat):
                    cand[f] = f
            else:
                for c in range(n_cand):
                    best = -1
                    for f in range(n_feat):
                        taken = False
                        for q in range(c):
                            if cand[q] == f:
                                taken = True
                                break
                        if not taken and (best < 0 or keys[node, f] < keys[node, best]):
                            best = f
                    cand[c] = best
                cand[:n_cand].sort()
            for c in range(n_cand):
                f = cand[c]
                # insertion sort of the node's rows by feature f (stable)
                for r in range(m):
                    row = idx[order[start + r]]
                    xv = X[row, f]
                    j = r
                    while j > 0 and xs[j - 1] > xv:
                        xs[j] = xs[j - 1]
                        ys[j] = ys[j - 1]
                        j -= 1
                    xs[j] = xv
                    ys[j] = y[row]
                ls = 0.0
                ls2 = 0.0
                for r in range(m - 1):
                    t = ys[r]
                    ls += t
                    ls2 += t * t
                    nl = r + 1
                    if nl < min_leaf or m - nl < min_leaf:
                        continue
                    if xs[r + 1] <= xs[r]:
                        continue
                    nr = m - nl
                    rs = s - ls
                    rs2 = s2 - ls2
                    gain = parent_sse - ((ls2 - ls * ls / nl) + (rs2 - rs * rs / nr))
                    if gain > best_gain + _EPS:
                        best_gain = gain
                        best_f = f
                        best_thr = 0.5 * (xs[r] + xs[r + 1])

        if best_f < 0:
            for r in range(start, stop):
                leaf_of_row[order[r]] = node
            continue

        lo = start
        hi = stop - 1
        while lo <= hi:
            if X[idx[order[lo]], best_f] <= best_thr:
                lo += 1
            else:
                tmp = order[lo]
                order[lo] = order[hi]
                order[hi] = tmp
                hi -= 1
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lchild
        right[node] = rchild
        stack[top, 0] = rchild
        stack[top, 1] = lo
        stack[top, 2] = stop
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lchild
        stack[top, 1] = start
        stack[top, 2] = lo
        stack[top, 3] = depth + 1
        top += 1
    return n_nodes


@njit(cache=True)
def grow_forest(X, y, idx, max_depth, min_leaf, n_try, keys):
    """Grow ``idx.shape[0]`` trees; tree ``t`` uses rows ``idx[t]`` (repeats allowed).

    ``keys[t]`` is a (max_nodes, n_features) array: node ``k`` considers the
    ``n_try`` features with the smallest ``keys[t, k]`` (every feature when
    ``n_try >= n_features``), scanned in ascending index. Among equal gains
    the lowest feature index, then the lowest threshold, wins.

    Returns node arrays of shape (n_trees, max_nodes), the node count per
    tree and the leaf reached by every training row.
    """
    n_trees, n_rows = idx.shape
    max_nodes = keys.shape[1]
    n_feat = X.shape[1]
    feature = np.empty((n_trees, max_nodes), np.int64)
    threshold = np.empty((n_trees, max_nodes))
    left = np.empty((n_trees, max_nodes), np.int64)
    right = np.empty((n_trees, max_nodes), np.int64)
    value = np.empty((n_trees, max_nodes))
    leaf_of_row = np.empty((n_trees, n_rows), np.int64)
    n_nodes = np.empty(n_trees, np.int64)

    order = np.empty(n_rows, np.int64)
    stack = np.empty((max_nodes + 1, 4), np.int64)
    xs = np.empty(n_rows)
    ys = np.empty(n_rows)
    cand = np.empty(n_feat, np.int64)
    for t in range(n_trees):
        n_nodes[t] = _grow_into(
            X, y, idx[t], max_depth, min_leaf, n_try, keys[t],
            feature[t], threshold[t], left[t], right[t], value[t], leaf_of_row[t],
            order, stack, xs, ys, cand,
        )
    return feature, threshold, left, right, value, n_nodes, leaf_of_row


@njit(cache=True)
def apply(X, feature, threshold, left, right):
    """Leaf index reached by every row of ``X`` in one tree."""
    n = X.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        k = 0
        while feature[k] >= 0:
            if X[i, feature[k]] <= threshold[k]:
                k = left[k]
            else:
                k = right[k]
        out[i] = k
    return out


@njit(cache=True)
def forest_mean(X, feature, threshold, left, right, value):
    """Mean leaf value over all trees of a forest stored as (n_trees, max_nodes) arrays."""
    n = X.shape[0]
    n_trees = feature.shape[0]
    out = np.zeros(n)
    for t in range(n_trees):
        for i in range(n):
            k = 0
            while feature[t, k] >= 0:
                if X[i, feature[t, k]] <= threshold[t, k]:
                    k = left[t, k]
                else:
                    k = right[t, k]
            out[i] += value[t, k]
    return out / n_trees
