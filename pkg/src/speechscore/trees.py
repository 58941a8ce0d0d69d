"""CART decision trees with explicit per-node cover and gain bookkeeping.

Trees are stored as flat arrays (preorder). Every node records its cover
(total sample weight that reached it) and, for internal nodes, the impurity
reduction of its split; both are required downstream by the gain-importance
ranking and the path-dependent SHAP recursion. Split search is exact greedy:
candidates are midpoints of consecutive distinct sorted feature values,
scored by weighted variance reduction (regression) or weighted Gini decrease
(classification), with ties broken by lowest feature index then lowest
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_LEAF = -1


@dataclass
class TreeParams:
    max_depth: int = 6
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    mtry: int | None = None    # features considered per split; None = all


@dataclass
class Tree:
    feature: np.ndarray        # int, -1 at leaves
    threshold: np.ndarray      # float, 0 at leaves
    left: np.ndarray           # int child index, -1 at leaves
    right: np.ndarray
    cover: np.ndarray          # total sample weight reaching the node
    gain: np.ndarray           # impurity reduction of the split, 0 at leaves
    value: np.ndarray          # (n_nodes,) or (n_nodes, n_classes)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == _LEAF

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Batch prediction via mask-based descent."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.value.ndim == 1:
            out = np.empty(X.shape[0], dtype=np.float64)
        else:
            out = np.empty((X.shape[0], self.value.shape[1]), dtype=np.float64)
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if self.is_leaf(node):
                out[rows] = self.value[node]
                continue
            goes_left = X[rows, self.feature[node]] <= self.threshold[node]
            stack.append((int(self.left[node]), rows[goes_left]))
            stack.append((int(self.right[node]), rows[~goes_left]))
        return out

    def leaf_mean(self) -> np.ndarray | float:
        """Cover-weighted mean of leaf values (the tree's expected output)."""
        leaves = self.feature == _LEAF
        weights = self.cover[leaves]
        values = self.value[leaves]
        if values.ndim == 1:
            return float((weights * values).sum() / weights.sum())
        return (weights[:, None] * values).sum(axis=0) / weights.sum()

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "cover": self.cover.tolist(), "gain": self.gain.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_json(cls, payload: dict) -> "Tree":
        return cls(feature=np.asarray(payload["feature"], dtype=np.int64),
                   threshold=np.asarray(payload["threshold"], dtype=np.float64),
                   left=np.asarray(payload["left"], dtype=np.int64),
                   right=np.asarray(payload["right"], dtype=np.int64),
                   cover=np.asarray(payload["cover"], dtype=np.float64),
                   gain=np.asarray(payload["gain"], dtype=np.float64),
                   value=np.asarray(payload["value"], dtype=np.float64))


@dataclass
class _Builder:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    cover: list = field(default_factory=list)
    gain: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add(self, cover, value, feature=_LEAF, threshold=0.0, gain=0.0) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(_LEAF)
        self.right.append(_LEAF)
        self.cover.append(cover)
        self.gain.append(gain)
        self.value.append(value)
        return len(self.feature) - 1

    def build(self) -> Tree:
        return Tree(feature=np.asarray(self.feature, dtype=np.int64),
                    threshold=np.asarray(self.threshold, dtype=np.float64),
                    left=np.asarray(self.left, dtype=np.int64),
                    right=np.asarray(self.right, dtype=np.int64),
                    cover=np.asarray(self.cover, dtype=np.float64),
                    gain=np.asarray(self.gain, dtype=np.float64),
                    value=np.asarray(self.value, dtype=np.float64))


def _node_value(y: np.ndarray, w: np.ndarray, n_classes: int | None):
    total = w.sum()
    if n_classes is None:
        return float((w * y).sum() / total)
    scores = np.zeros(n_classes, dtype=np.float64)
    np.add.at(scores, y.astype(np.int64), w)
    return scores / total


def _impurity_times_weight(y, w, n_classes):
    """Weighted SSE (regression) or weighted Gini * total weight."""
    total = w.sum()
    if n_classes is None:
        mean = (w * y).sum() / total
        return float((w * (y - mean) ** 2).sum())
    scores = np.zeros(n_classes, dtype=np.float64)
    np.add.at(scores, y.astype(np.int64), w)
    return float(total - (scores ** 2).sum() / total)


def _best_split_of_feature(x, y, w, min_leaf, n_classes):
    """Return (gain*weight, threshold) for the best split on one feature."""
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    n = xs.size
    boundary = xs[:-1] < xs[1:]
    counts = np.arange(1, n)
    feasible = boundary & (counts >= min_leaf) & (n - counts >= min_leaf)
    if not feasible.any():
        return None

    cw = np.cumsum(ws)[:-1]
    total_w = cw[-1] + ws[-1]
    if n_classes is None:
        cwy = np.cumsum(ws * ys)[:-1]
        cwy2 = np.cumsum(ws * ys * ys)[:-1]
        total_wy = cwy[-1] + ws[-1] * ys[-1]
        total_wy2 = cwy2[-1] + ws[-1] * ys[-1] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            sse_left = cwy2 - cwy ** 2 / cw
            rw = total_w - cw
            sse_right = (total_wy2 - cwy2) - (total_wy - cwy) ** 2 / rw
        parent = total_wy2 - total_wy ** 2 / total_w
        scores = parent - sse_left - sse_right
        noise_floor = 1e-12 * max(total_wy2, 1.0)
    else:
        onehot = np.zeros((n, n_classes), dtype=np.float64)
        onehot[np.arange(n), ys.astype(np.int64)] = ws
        ck = np.cumsum(onehot, axis=0)[:-1]
        tk = ck[-1] + onehot[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            rw = total_w - cw
            gini_left = cw - (ck ** 2).sum(axis=1) / cw
            gini_right = rw - ((tk - ck) ** 2).sum(axis=1) / rw
        parent = total_w - (tk ** 2).sum() / total_w
        scores = parent - gini_left - gini_right
        noise_floor = 1e-12 * max(total_w, 1.0)

    scores = np.where(feasible, scores, -np.inf)
    best = int(np.argmax(scores))           # first max = lowest threshold
    if not np.isfinite(scores[best]) or scores[best] <= noise_floor:
        return None
    threshold = (xs[best] + xs[best + 1]) / 2.0
    return float(scores[best]), threshold


def fit_tree(X: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None,
             params: TreeParams | None = None, task: str = "regression",
             n_classes: int | None = None,
             rng: np.random.Generator | None = None) -> Tree:
    """Grow a CART tree; classification when task="classification"."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("X and y must be non-empty and aligned")
    if weights is None:
        weights = np.ones(y.shape[0], dtype=np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
    params = params or TreeParams()
    if task == "classification":
        if n_classes is None:
            n_classes = int(y.max()) + 1
    else:
        n_classes = None
    n_features = X.shape[1]
    mtry = params.mtry
    if mtry is not None:
        mtry = max(1, min(mtry, n_features))
    if mtry is not None and rng is None:
        rng = np.random.default_rng(0)

    builder = _Builder()

    def grow(idx: np.ndarray, depth: int) -> int:
        yv, wv = y[idx], weights[idx]
        cover = float(wv.sum())
        value = _node_value(yv, wv, n_classes)
        n = idx.size
        if (depth >= params.max_depth or n < params.min_samples_split
                or 2 * params.min_samples_leaf > n):
            return builder.add(cover, value)

        if mtry is not None and mtry < n_features:
            candidates = np.sort(rng.choice(n_features, size=mtry, replace=False))
        else:
            candidates = range(n_features)

        best = None     # (score, feature, threshold)
        for f in candidates:
            found = _best_split_of_feature(X[idx, f], yv, wv,
                                           params.min_samples_leaf, n_classes)
            if found is not None and (best is None or found[0] > best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return builder.add(cover, value)

        score, f, threshold = best
        node = builder.add(cover, value, feature=f, threshold=threshold,
                           gain=score / cover)
        goes_left = X[idx, f] <= threshold
        builder.left[node] = grow(idx[goes_left], depth + 1)
        builder.right[node] = grow(idx[~goes_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return builder.build()
