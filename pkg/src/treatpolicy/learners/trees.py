"""Gradient boosted regression trees, squared and logistic loss.

Trees are grown greedily by variance reduction on the stage targets
(residuals for squared loss, pseudo-residuals y - p for logistic loss).
Candidate thresholds are midpoints between consecutive distinct sorted
values; ties in gain break toward the lowest feature index, then the lowest
threshold.  Leaf values are the mean target for squared loss and the
gradient/hessian Newton step sum(y - p) / sum(p (1 - p)) for logistic loss.

There is no row or feature subsampling, so fits are deterministic; ``seed``
is stored for interface symmetry only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError
from .linear import sigmoid

__all__ = ["Tree", "BoostedTreesModel", "fit_gbt"]

LEAF = -1


@dataclass
class Tree:
    """One regression tree in flat-array form.

    ``feature[i] == -1`` marks node i as a leaf with prediction ``value[i]``;
    otherwise rows with ``x[feature[i]] <= threshold[i]`` go to ``left[i]``.
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        return self._add(LEAF, 0.0, LEAF, LEAF, value)

    def add_split(self, feature: int, threshold: float) -> int:
        return self._add(feature, threshold, LEAF, LEAF, 0.0)

    def _add(self, f, t, l, r, v) -> int:
        self.feature.append(int(f))
        self.threshold.append(float(t))
        self.left.append(int(l))
        self.right.append(int(r))
        self.value.append(float(v))
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.feature[node] == LEAF:
                out[idx] = self.value[node]
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": [float(t) for t in self.threshold],
            "left": list(self.left),
            "right": list(self.right),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=list(d["feature"]),
            threshold=[float(t) for t in d["threshold"]],
            left=list(d["left"]),
            right=list(d["right"]),
            value=[float(v) for v in d["value"]],
        )


def _best_split(X, g, idx, min_leaf):
    """Best (feature, threshold, gain) by variance reduction over rows idx.

    Returns None when no split strictly improves the squared-error criterion.
    """
    m = idx.size
    if m < 2 * min_leaf:
        return None
    best = None  # (gain, feature, threshold, sorted order, split position)
    g_node = g[idx]
    total = float(g_node.sum())
    base = total * total / m
    for j in range(X.shape[1]):
        xs_raw = X[idx, j]
        order = np.argsort(xs_raw, kind="stable")
        xs = xs_raw[order]
        if xs[0] == xs[-1]:
            continue
        gs = g_node[order]
        left_sum = np.cumsum(gs)[:-1]
        k = np.arange(1, m)
        valid = xs[1:] != xs[:-1]
        if min_leaf > 1:
            valid &= (k >= min_leaf) & (m - k >= min_leaf)
        if not valid.any():
            continue
        right_sum = total - left_sum
        gain = left_sum**2 / k + right_sum**2 / (m - k) - base
        gain = np.where(valid, gain, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > 1e-12 and (best is None or gain[pos] > best[0]):
            thr = 0.5 * (xs[pos] + xs[pos + 1])
            best = (float(gain[pos]), j, thr, order, pos + 1)
    return best


def _grow(tree, X, g, h, idx, depth, max_depth, min_leaf, leaf_value):
    split = None if depth >= max_depth else _best_split(X, g, idx, min_leaf)
    if split is None:
        return tree.add_leaf(leaf_value(idx))
    _gain, feat, thr, order, cut = split
    node = tree.add_split(feat, thr)
    left_idx = idx[order[:cut]]
    right_idx = idx[order[cut:]]
    tree.left[node] = _grow(tree, X, g, h, left_idx, depth + 1, max_depth, min_leaf, leaf_value)
    tree.right[node] = _grow(tree, X, g, h, right_idx, depth + 1, max_depth, min_leaf, leaf_value)
    return node


@dataclass
class BoostedTreesModel:
    base_score: float
    learning_rate: float
    loss: str
    trees: list[Tree]
    n_features: int
    seed: int | None = None

    def raw_predict(self, X, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        use = self.trees if n_trees is None else self.trees[:n_trees]
        out = np.full(X.shape[0], self.base_score)
        for tree in use:
            out += self.learning_rate * tree.predict(X)
        return out

    def predict(self, X, n_trees: int | None = None) -> np.ndarray:
        raw = self.raw_predict(X, n_trees)
        if self.loss == "logistic":
            return sigmoid(raw)
        return raw

    def predict_proba(self, X, n_trees: int | None = None) -> np.ndarray:
        if self.loss != "logistic":
            raise ValueError("predict_proba requires logistic loss")
        return sigmoid(self.raw_predict(X, n_trees))

    def to_dict(self) -> dict:
        return {
            "base_score": float(self.base_score),
            "learning_rate": float(self.learning_rate),
            "loss": self.loss,
            "trees": [t.to_dict() for t in self.trees],
            "n_features": int(self.n_features),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedTreesModel":
        return cls(
            base_score=float(d["base_score"]),
            learning_rate=float(d["learning_rate"]),
            loss=d["loss"],
            trees=[Tree.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            seed=d.get("seed"),
        )


def fit_gbt(
    X,
    y,
    *,
    loss: str = "squared",
    n_trees: int = 200,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    min_samples_leaf: int = 1,
    seed: int | None = None,
) -> BoostedTreesModel:
    """Fit a gradient boosted trees model.

    A constant target yields a single-leaf model (every tree degenerates to a
    zero leaf), never an error.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise ValueError("y length does not match X")
    if X.shape[0] == 0:
        raise DataError("cannot fit on an empty dataset")
    if loss not in ("squared", "logistic"):
        raise ValueError(f"unknown loss {loss!r}")
    if n_trees < 0 or max_depth < 1 or min_samples_leaf < 1:
        raise ValueError("n_trees, max_depth, min_samples_leaf out of range")

    n = X.shape[0]
    idx_all = np.arange(n)

    if loss == "logistic":
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise DataError("logistic loss requires 0/1 targets")
        p_bar = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
        base = float(np.log(p_bar / (1.0 - p_bar)))
    else:
        base = float(y.mean())

    F = np.full(n, base)
    trees: list[Tree] = []
    for _ in range(n_trees):
        if loss == "logistic":
            p = sigmoid(F)
            g = y - p
            h = np.clip(p * (1.0 - p), 1e-12, None)

            def leaf_value(idx, g=g, h=h):
                return float(g[idx].sum() / max(h[idx].sum(), 1e-12))

        else:
            g = y - F
            h = None

            def leaf_value(idx, g=g):
                return float(g[idx].mean())

        tree = Tree()
        _grow(tree, X, g, h, idx_all, 0, max_depth, min_samples_leaf, leaf_value)
        trees.append(tree)
        F += learning_rate * tree.predict(X)

    return BoostedTreesModel(
        base_score=base,
        learning_rate=learning_rate,
        loss=loss,
        trees=trees,
        n_features=X.shape[1],
        seed=seed,
    )
