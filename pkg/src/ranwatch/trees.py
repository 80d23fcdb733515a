"""Deterministic regression trees shared by the forest and boosting models.

Trees are grown by exhaustive variance-reduction split search with stable
tie-breaking (first feature in candidate order, then lowest threshold), so
the same data, hyperparameters, and seed always produce the same tree.
Nodes are stored as flat parallel arrays, which keeps prediction a handful
of vectorized gather steps and makes JSON serialization lossless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    feature: np.ndarray  # int, -1 marks a leaf
    threshold: np.ndarray  # float, split point (values <= go left)
    left: np.ndarray  # int child index, self at leaves
    right: np.ndarray
    value: np.ndarray  # float, node prediction (leaf values are used)

    def leaf_indices(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                return idx
            node = idx[active]
            go_left = X[active, self.feature[node]] <= self.threshold[node]
            idx[active] = np.where(go_left, self.left[node], self.right[node])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.leaf_indices(X)]

    def to_dict(self) -> dict:
        return {
            "feature": [int(v) for v in self.feature],
            "threshold": [float(v) for v in self.threshold],
            "left": [int(v) for v in self.left],
            "right": [int(v) for v in self.right],
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=float),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=float),
        )


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    rows: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: int,
) -> tuple[int, float] | None:
    """Weighted-SSE-optimal (feature, threshold) over candidate features."""
    w_node = w[rows]
    y_node = y[rows]
    total_w = w_node.sum()
    total_wy = float(np.dot(w_node, y_node))
    total_wy2 = float(np.dot(w_node, y_node * y_node))
    parent_sse = total_wy2 - total_wy * total_wy / total_w

    best_gain = 1e-12  # splits must strictly reduce the weighted SSE
    best: tuple[int, float] | None = None
    n = rows.size
    for f in features:
        xs = X[rows, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        if xs_sorted[0] == xs_sorted[-1]:
            continue
        w_sorted = w_node[order]
        wy_sorted = w_sorted * y_node[order]
        wy2_sorted = wy_sorted * y_node[order]
        cw = np.cumsum(w_sorted)
        cwy = np.cumsum(wy_sorted)
        cwy2 = np.cumsum(wy2_sorted)

        cut = np.arange(1, n)  # left side takes the first `cut` sorted rows
        valid = xs_sorted[1:] > xs_sorted[:-1]
        valid &= (cut >= min_samples_leaf) & (n - cut >= min_samples_leaf)
        if not valid.any():
            continue
        lw = cw[:-1]
        rw = total_w - lw
        sse_left = cwy2[:-1] - cwy[:-1] ** 2 / lw
        sse_right = (total_wy2 - cwy2[:-1]) - (total_wy - cwy[:-1]) ** 2 / rw
        gain = parent_sse - sse_left - sse_right
        gain[~valid] = -np.inf
        pos = int(np.argmax(gain))  # first occurrence wins ties
        if gain[pos] > best_gain:
            best_gain = float(gain[pos])
            threshold = 0.5 * (xs_sorted[pos] + xs_sorted[pos + 1])
            best = (int(f), float(threshold))
    return best


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    *,
    max_depth: int,
    min_samples_leaf: int = 1,
    sample_weight: np.ndarray | None = None,
    n_candidate_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a regression tree depth-first (left before right).

    When ``n_candidate_features`` is set, each split draws that many
    features without replacement from ``rng``; the draw order is fixed by
    the depth-first traversal, so the tree is a pure function of
    (data, hyperparameters, rng state).
    """
    n, d = X.shape
    w = np.ones(n, dtype=float) if sample_weight is None else np.asarray(sample_weight, float)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node(rows: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(node)
        right.append(node)
        w_rows = w[rows]
        value.append(float(np.dot(w_rows, y[rows]) / w_rows.sum()))
        return node

    root_rows = np.arange(n)
    root = new_node(root_rows)
    stack: list[tuple[int, np.ndarray, int]] = [(root, root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2 * min_samples_leaf or rows.size < 2:
            continue
        if n_candidate_features is not None and n_candidate_features < d:
            assert rng is not None
            candidates = rng.choice(d, size=n_candidate_features, replace=False)
        else:
            candidates = np.arange(d)
        split = _best_split(X, y, w, rows, candidates, min_samples_leaf)
        if split is None:
            continue
        f, thr = split
        mask = X[rows, f] <= thr
        left_rows = rows[mask]
        right_rows = rows[~mask]
        if left_rows.size == 0 or right_rows.size == 0:
            continue
        feature[node] = f
        threshold[node] = thr
        left_child = new_node(left_rows)
        right_child = new_node(right_rows)
        left[node] = left_child
        right[node] = right_child
        # push right first so the left branch is grown first
        stack.append((right_child, right_rows, depth + 1))
        stack.append((left_child, left_rows, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
    )
