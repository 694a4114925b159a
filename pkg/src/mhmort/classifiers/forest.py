"""CART trees with Gini splits and a bagged random forest over them.

Features are binary, so each split tests ``x[f] > 0.5``. Bootstrap resamples
enter as integer row weights instead of duplicated rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..rng import stream
from .base import check_width


def gini_impurity(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _split_gains(X, y, w, features):
    """Impurity decrease for splitting on each of ``features`` at 0.5."""
    Xf = X[:, features] > 0.5
    wy = w * y
    total = w.sum()
    pos = wy.sum()
    right_n = w @ Xf
    right_pos = wy @ Xf
    left_n = total - right_n
    left_pos = pos - right_pos

    def weighted_gini(n, p):
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(n > 0, p / n, 0.0)
        return n * 2.0 * frac * (1.0 - frac)

    parent = 2.0 * (pos / total) * (1.0 - pos / total)
    children = (weighted_gini(left_n, left_pos) + weighted_gini(right_n, right_pos)) / total
    return parent - children, left_n, right_n


def best_split(X, y, candidate_features: Optional[Sequence[int]] = None,
               weights=None) -> tuple[Optional[int], float]:
    """Return ``(feature, gain)`` maximising Gini decrease, or ``(None, 0.0)``.

    Features constant over the rows are not valid splits. Ties go to the
    earliest candidate.
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=np.float64)
    feats = np.arange(X.shape[1]) if candidate_features is None else np.asarray(candidate_features)
    if len(feats) == 0 or len(y) == 0:
        return None, 0.0
    gains, left_n, right_n = _split_gains(X, y, w, feats)
    valid = (left_n > 0) & (right_n > 0)
    if not valid.any():
        return None, 0.0
    gains = np.where(valid, gains, -np.inf)
    k = int(np.argmax(gains))
    return int(feats[k]), float(gains[k])


@dataclass(frozen=True)
class DecisionTree:
    feature: np.ndarray  # -1 marks a leaf
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) weighted class counts
    threshold: float = 0.5

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.arange(X.shape[0])
        while active.size:
            f = self.feature[node[active]]
            internal = f >= 0
            active, f = active[internal], f[internal]
            if not active.size:
                break
            cur = node[active]
            node[active] = np.where(X[active, f] > self.threshold, self.right[cur], self.left[cur])
        return node

    def vote(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.apply(X)]
        return (c[:, 1] > c[:, 0]).astype(np.float64)

    def to_dict(self) -> dict:
        return {"feature": self.feature.tolist(), "left": self.left.tolist(),
                "right": self.right.tolist(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(np.asarray(d["feature"], dtype=np.intp), np.asarray(d["left"], dtype=np.intp),
                   np.asarray(d["right"], dtype=np.intp),
                   np.asarray(d["counts"], dtype=np.float64).reshape(-1, 2))


def build_tree(X: np.ndarray, y: np.ndarray, weights: Optional[np.ndarray] = None,
               max_features: Optional[int] = None, max_depth: Optional[int] = None,
               min_leaf: int = 1, rng: Optional[np.random.Generator] = None) -> DecisionTree:
    """Grow one CART tree depth-first.

    With ``max_features`` set, features are visited in random order until
    that many non-constant ones have been scored (constant draws do not
    count), as in the usual random-forest recipe.
    """
    n, d = X.shape
    y = y.astype(np.float64)
    w = np.ones(n) if weights is None else weights.astype(np.float64)
    rows = np.flatnonzero(w > 0)
    feature, left, right, counts = [], [], [], []

    def new_node(idx):
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        wi = w[idx]
        pos = float(wi @ y[idx])
        counts.append((float(wi.sum()) - pos, pos))
        return len(feature) - 1

    stack = [(new_node(rows), rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        neg, pos = counts[node]
        if neg == 0 or pos == 0:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        if w[idx].sum() < 2 * min_leaf:
            continue
        Xn, yn, wn = X[idx], y[idx], w[idx]
        ones = wn @ Xn
        total = wn.sum()
        nonconst = np.flatnonzero((ones >= min_leaf) & (total - ones >= min_leaf))
        if nonconst.size == 0:
            continue
        if max_features is not None and max_features < d:
            order = rng.permutation(d)
            keep = np.zeros(d, dtype=bool)
            keep[nonconst] = True
            cand = order[keep[order]][:max_features]
        else:
            cand = nonconst
        f, _ = best_split(Xn, yn, cand, wn)
        if f is None:
            continue
        go_right = Xn[:, f] > 0.5
        r_idx, l_idx = idx[go_right], idx[~go_right]
        feature[node] = f
        left[node] = new_node(l_idx)
        right[node] = new_node(r_idx)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], r_idx, depth + 1))
        stack.append((left[node], l_idx, depth + 1))

    return DecisionTree(np.asarray(feature, dtype=np.intp), np.asarray(left, dtype=np.intp),
                        np.asarray(right, dtype=np.intp), np.asarray(counts, dtype=np.float64))


def resolve_max_features(setting, d: int) -> Optional[int]:
    if setting is None or setting == "all":
        return None
    if setting == "sqrt":
        return max(1, int(np.sqrt(d)))
    value = int(setting)
    if value < 1:
        raise ValueError("max_features must be >= 1")
    return value


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    width: int

    algorithm = "random_forest"

    def score(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting for class 1."""
        return self.tree_votes(X).sum(axis=0) / len(self.trees)

    def tree_votes(self, X: np.ndarray, trees: Optional[Sequence[int]] = None) -> np.ndarray:
        """0/1 votes, shape ``(len(trees), n_rows)``; all trees by default."""
        check_width(X, self.width)
        chosen = range(len(self.trees)) if trees is None else trees
        return np.array([self.trees[t].vote(X) for t in chosen]).reshape(-1, X.shape[0])

    def used_features(self) -> set:
        return {int(f) for t in self.trees for f in t.feature if f >= 0}

    def trees_using(self, feature: int) -> list[int]:
        return [i for i, t in enumerate(self.trees) if np.any(t.feature == feature)]

    def params(self) -> dict:
        return {"width": self.width, "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, params: dict) -> "ForestModel":
        return cls(tuple(DecisionTree.from_dict(t) for t in params["trees"]), int(params["width"]))


def fit_forest(X: np.ndarray, y: np.ndarray, n_trees: int = 100, max_features="sqrt",
               bootstrap: bool = True, max_depth: Optional[int] = None, min_leaf: int = 1,
               seed: int = 0) -> ForestModel:
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, d = X.shape
    m = resolve_max_features(max_features, d)
    trees = []
    for t in range(n_trees):
        rng = stream(seed, "rf-tree", t)
        if bootstrap:
            weights = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            weights = np.ones(n)
        trees.append(build_tree(X, y, weights, m, max_depth, min_leaf, rng))
    return ForestModel(tuple(trees), d)
