"""Regression trees grown best-first under a leaf budget, or level-wise under a depth budget.

Splits are exact greedy squared-error reductions over pre-sorted feature
columns. Routing rule everywhere: go left iff ``x[feature] <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

LEAF_CLIPPED = "leaf-clipped"
DEPTH_CLIPPED = "depth-clipped"
GROWTH_MODES = (LEAF_CLIPPED, DEPTH_CLIPPED)

# a split must remove more than this fraction of the node's SSE; anything
# smaller is float noise on (numerically) constant residuals
_REL_GAIN_TOL = 1e-12


@dataclass(frozen=True)
class SplitCandidate:
    node: int
    feature: int
    threshold: float
    gain: float
    left_count: int
    right_count: int


@njit(cache=True)
def _node_best_split(X, order, r, start, end, min_leaf):
    """Best (gain, feature, threshold, n_left) for rows ``order[:, start:end]``.

    Returns feature -1 when no split clears the gain tolerance.
    """
    n = end - start
    d = X.shape[1]
    if n < 2 * min_leaf or n < 2:
        return 0.0, -1, 0.0, 0
    total = 0.0
    for k in range(start, end):
        total += r[order[0, k]]
    mean = total / n
    # centred sums keep constant residuals at exactly zero gain
    total_c = 0.0
    sst = 0.0
    for k in range(start, end):
        c = r[order[0, k]] - mean
        total_c += c
        sst += c * c
    best_gain = _REL_GAIN_TOL * sst
    if sst <= 0.0:
        return 0.0, -1, 0.0, 0
    best_f = -1
    best_thr = 0.0
    best_nl = 0
    parent_term = total_c * total_c / n
    for f in range(d):
        s_left = 0.0
        for k in range(start, end - 1):
            row = order[f, k]
            s_left += r[row] - mean
            nl = k - start + 1
            nr = n - nl
            if nr < min_leaf:
                break
            if nl < min_leaf:
                continue
            xa = X[row, f]
            xb = X[order[f, k + 1], f]
            if not xa < xb:
                continue
            s_right = total_c - s_left
            gain = s_left * s_left / nl + s_right * s_right / nr - parent_term
            if gain > best_gain:
                best_gain = gain
                best_f = f
                thr = 0.5 * (xa + xb)
                if thr >= xb:
                    # adjacent floats: the midpoint rounds up onto xb
                    thr = xa
                best_thr = thr
                best_nl = nl
    if best_f < 0:
        return 0.0, -1, 0.0, 0
    return best_gain, best_f, best_thr, best_nl


@njit(cache=True)
def _segment_mean(order, r, start, end):
    s = 0.0
    for k in range(start, end):
        s += r[order[0, k]]
    return s / (end - start)


@njit(cache=True)
def _grow(X, order_in, r, max_leaves, max_depth, min_leaf, best_first):
    n, d = X.shape
    order = order_in.copy()
    max_nodes = 2 * max_leaves - 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes)
    start = np.zeros(max_nodes, dtype=np.int64)
    end = np.zeros(max_nodes, dtype=np.int64)
    depth = np.zeros(max_nodes, dtype=np.int64)
    c_gain = np.zeros(max_nodes)
    c_feat = np.full(max_nodes, -1, dtype=np.int64)
    c_thr = np.zeros(max_nodes)
    c_nl = np.zeros(max_nodes, dtype=np.int64)

    end[0] = n
    value[0] = _segment_mean(order, r, 0, n)
    if max_depth < 0 or max_depth > 0:
        c_gain[0], c_feat[0], c_thr[0], c_nl[0] = _node_best_split(X, order, r, 0, n, min_leaf)
    n_nodes = 1
    n_leaves = 1
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(n, dtype=order.dtype)

    while n_leaves < max_leaves:
        pick = -1
        for node in range(n_nodes):
            if feature[node] >= 0 or c_feat[node] < 0:
                continue
            if pick < 0:
                pick = node
                if not best_first:
                    # level-wise: lowest node index is the shallowest open leaf
                    break
            elif c_gain[node] > c_gain[pick] or (
                c_gain[node] == c_gain[pick]
                and (c_feat[node] < c_feat[pick]
                     or (c_feat[node] == c_feat[pick] and c_thr[node] < c_thr[pick]))
            ):
                pick = node
        if pick < 0:
            break

        f = c_feat[pick]
        thr = c_thr[pick]
        s = start[pick]
        e = end[pick]
        for k in range(s, e):
            row = order[f, k]
            goes_left[row] = X[row, f] <= thr
        for ff in range(d):
            a = s
            b = 0
            for k in range(s, e):
                row = order[ff, k]
                if goes_left[row]:
                    order[ff, a] = row
                    a += 1
                else:
                    buf[b] = row
                    b += 1
            for t in range(b):
                order[ff, a + t] = buf[t]
        mid = s + c_nl[pick]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[pick] = f
        threshold[pick] = thr
        left[pick] = lc
        right[pick] = rc
        start[lc] = s
        end[lc] = mid
        start[rc] = mid
        end[rc] = e
        for child in (lc, rc):
            depth[child] = depth[pick] + 1
            value[child] = _segment_mean(order, r, start[child], end[child])
            if max_depth < 0 or depth[child] < max_depth:
                c_gain[child], c_feat[child], c_thr[child], c_nl[child] = _node_best_split(
                    X, order, r, start[child], end[child], min_leaf)
        n_leaves += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True)
def _route(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@dataclass(frozen=True)
class RegressionTree:
    """Flat array tree. Internal nodes have ``feature >= 0``; leaves carry ``value``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    growth_mode: str = LEAF_CLIPPED
    n_features: int = -1

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def n_internal(self) -> int:
        return int(np.sum(self.feature >= 0))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def leaf_values(self) -> np.ndarray:
        return self.value[self.feature < 0]

    def predict(self, X) -> np.ndarray:
        return tree_predict(self, X)

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                nodes.append({
                    "id": i,
                    "feature": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                })
            else:
                nodes.append({"id": i, "value": float(self.value[i])})
        return {"growth_mode": self.growth_mode, "n_features": self.n_features, "nodes": nodes}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        nodes = d["nodes"]
        n = len(nodes)
        feature = np.full(n, -1, dtype=np.int64)
        threshold = np.zeros(n)
        left = np.full(n, -1, dtype=np.int64)
        right = np.full(n, -1, dtype=np.int64)
        value = np.zeros(n)
        for i, node in enumerate(nodes):
            if node["id"] != i:
                raise ValueError(f"node ids must be 0..{n - 1} in order, got {node['id']} at {i}")
            if "value" in node:
                value[i] = float(node["value"])
            else:
                feature[i] = int(node["feature"])
                threshold[i] = float(node["threshold"])
                left[i] = int(node["left"])
                right[i] = int(node["right"])
        tree = cls(feature, threshold, left, right, value,
                   d.get("growth_mode", LEAF_CLIPPED), int(d.get("n_features", -1)))
        check_tree(tree)
        return tree


def check_tree(tree: RegressionTree) -> None:
    """Raise ``ValueError`` unless ``tree`` is a well-formed binary tree rooted at 0."""
    n = tree.n_nodes
    if n == 0:
        raise ValueError("tree has no nodes")
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    while stack:
        node = stack.pop()
        if seen[node]:
            raise ValueError(f"node {node} reached twice")
        seen[node] = True
        if tree.feature[node] >= 0:
            if tree.n_features >= 0 and tree.feature[node] >= tree.n_features:
                raise ValueError(f"node {node} splits on unknown feature {tree.feature[node]}")
            for child in (tree.left[node], tree.right[node]):
                if not 0 < child < n:
                    raise ValueError(f"node {node} has invalid child {child}")
                stack.append(int(child))
    if not seen.all():
        raise ValueError("tree has unreachable nodes")
    if tree.n_leaves != tree.n_internal + 1:
        raise ValueError("leaf count must equal internal count + 1")


def presort(X) -> np.ndarray:
    """Row ids sorted by each feature, shape ``(n_features, n_rows)``."""
    X = np.asarray(X, dtype=np.float64)
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def _prepare(features, residuals, order):
    X = np.ascontiguousarray(features, dtype=np.float64)
    r = np.ascontiguousarray(residuals, dtype=np.float64)
    if X.ndim != 2 or r.ndim != 1 or X.shape[0] != r.shape[0]:
        raise ValueError("features must be (n, d) and residuals length n")
    if X.shape[0] == 0:
        raise ValueError("cannot grow a tree on empty input")
    if order is None:
        order = presort(X)
    return X, r, order


def best_split(x_column, residuals, min_samples_leaf: int = 1) -> Optional[SplitCandidate]:
    """Exact greedy split of a single feature column; ``None`` when no split has positive gain."""
    x = np.asarray(x_column, dtype=np.float64).reshape(-1, 1)
    X, r, order = _prepare(x, residuals, None)
    gain, f, thr, nl = _node_best_split(X, order, r, 0, X.shape[0], min_samples_leaf)
    if f < 0:
        return None
    return SplitCandidate(0, int(f), float(thr), float(gain), int(nl), int(X.shape[0] - nl))


def grow_best_first(features, residuals, max_leaves: Optional[int] = 31,
                    min_samples_leaf: int = 1, order=None) -> RegressionTree:
    """Leaf-wise growth: always split the open leaf with the largest gain.

    ``max_leaves=None`` grows until no positive-gain split remains.
    ``order`` may pass a cached :func:`presort` of ``features``.
    """
    X, r, order = _prepare(features, residuals, order)
    if max_leaves is None:
        max_leaves = X.shape[0]
    if max_leaves < 1:
        raise ValueError("max_leaves must be >= 1")
    arrays = _grow(X, order, r, min(int(max_leaves), X.shape[0]), -1, int(min_samples_leaf), True)
    return RegressionTree(*arrays, growth_mode=LEAF_CLIPPED, n_features=X.shape[1])


def grow_depth_wise(features, residuals, max_depth: Optional[int] = 3,
                    min_samples_leaf: int = 1, order=None) -> RegressionTree:
    """Level-wise growth: split every splittable node, shallowest first, down to ``max_depth``."""
    X, r, order = _prepare(features, residuals, order)
    if max_depth is not None and max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    n = X.shape[0]
    if max_depth is None or max_depth >= 62:
        leaf_cap, depth_arg = n, -1
    else:
        leaf_cap, depth_arg = min(n, 2 ** max_depth), int(max_depth)
    arrays = _grow(X, order, r, leaf_cap, depth_arg, int(min_samples_leaf), False)
    return RegressionTree(*arrays, growth_mode=DEPTH_CLIPPED, n_features=X.shape[1])


def grow_tree(features, residuals, growth_mode: str, max_leaves: Optional[int] = 31,
              max_depth: Optional[int] = 3, min_samples_leaf: int = 1, order=None) -> RegressionTree:
    if growth_mode == LEAF_CLIPPED:
        return grow_best_first(features, residuals, max_leaves, min_samples_leaf, order)
    if growth_mode == DEPTH_CLIPPED:
        return grow_depth_wise(features, residuals, max_depth, min_samples_leaf, order)
    raise ValueError(f"unknown growth mode {growth_mode!r}")


def tree_predict(tree: RegressionTree, features) -> np.ndarray:
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    if tree.n_features >= 0 and X.shape[1] != tree.n_features:
        raise ValueError(f"tree expects {tree.n_features} features, got {X.shape[1]}")
    return _route(X, tree.feature, tree.threshold, tree.left, tree.right, tree.value)
