"""Binary decision trees and the two ensembles used as feature-graph extractors.

Trees are stored as flat parallel arrays (node 0 is the root); a node with
``feature == -1`` is a leaf.  Samples go left when ``x[feature] <= threshold``.

RF trees hold the class-1 fraction of their leaf; GBM trees hold an unscaled
Newton step, and the ensemble applies the learning rate at prediction time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, DataError

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    # impurity decrease (weighted by node size) of each split, 0 at leaves
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] == LEAF

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Index of the leaf reached by every row of ``x``."""
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r, nd = rows[active], node[active]
            go_left = x[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    def to_dict(self, i: int = 0) -> dict:
        if self.feature[i] == LEAF:
            return {"value": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "gain": float(self.gain[i]),
            "left": self.to_dict(int(self.left[i])),
            "right": self.to_dict(int(self.right[i])),
        }

    @classmethod
    def from_dict(cls, root: dict) -> "Tree":
        b = _TreeBuilder()
        stack = [(root, None, False)]
        while stack:
            rec, parent, is_right = stack.pop()
            if "feature" in rec:
                i = b.add(rec["feature"], rec["threshold"], 0.0, rec.get("gain", 0.0))
            else:
                i = b.add(LEAF, 0.0, rec["value"], 0.0)
            if parent is not None:
                (b.right if is_right else b.left)[parent] = i
            if "feature" in rec:
                stack.append((rec["right"], i, True))
                stack.append((rec["left"], i, False))
        return b.build()


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.value, self.gain = [], [], [], []
        self.left, self.right = [], []

    def add(self, feature, threshold, value, gain) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.value.append(value)
        self.gain.append(gain)
        self.left.append(LEAF)
        self.right.append(LEAF)
        return len(self.feature) - 1

    def build(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            gain=np.array(self.gain, dtype=np.float64),
        )


@dataclass
class Forest:
    kind: str  # "RF" or "GBM"
    trees: list[Tree]
    n_features: int
    learning_rate: float = 1.0
    base_score: float = 0.0
    params: dict = field(default_factory=dict)
    # GBM only: training logistic loss before the first tree and after each tree
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "n_features": self.n_features,
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "params": self.params,
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "Forest":
        doc = json.loads(text)
        return cls(
            kind=doc["kind"],
            trees=[Tree.from_dict(t) for t in doc["trees"]],
            n_features=doc["n_features"],
            learning_rate=doc["learning_rate"],
            base_score=doc["base_score"],
            params=doc["params"],
        )


def _best_split(xn, wn, sums, min_leaf, criterion):
    """Scan all midpoints of the node's sorted candidate columns.

    ``xn`` is (m, k) node values for the candidate features, ``wn`` the node
    sample weights and ``sums`` a list of per-sample statistics that the
    criterion needs cumulated (class-1 weight for Gini, residual for SSE).
    Returns (column, threshold, score) of the lowest score, or None.  Ties go
    to the lowest column, then the lowest threshold.
    """
    m, k = xn.shape
    if m < 2:
        return None
    order = np.argsort(xn, axis=0, kind="stable")
    xs = np.take_along_axis(xn, order, axis=0)
    cw = np.cumsum(wn[order], axis=0)[:-1]
    cs = [np.cumsum(s[order], axis=0)[:-1] for s in sums]
    total_w = cw[-1] + wn[order[-1]]
    totals = [c[-1] + s[order[-1]] for c, s in zip(cs, sums)]
    valid = (xs[:-1] < xs[1:]) & (cw >= min_leaf) & (total_w - cw >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = criterion(cw, cs, total_w, totals)
    score = np.where(valid, score, np.inf)
    flat = np.argmin(score.T)  # column-major: lowest column first, then lowest position
    col, pos = divmod(int(flat), m - 1)
    if not np.isfinite(score[pos, col]):
        return None
    lo, hi = xs[pos, col], xs[pos + 1, col]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return col, float(thr), float(score[pos, col])


def _gini_score(cw, cs, total_w, totals):
    # sum over children of n_child * gini_child (binary classes)
    (c1,) = cs
    (t1,) = totals
    rw = total_w - cw
    r1 = t1 - c1
    return 2.0 * (c1 * (cw - c1) / cw + r1 * (rw - r1) / rw)


def _sse_score(cw, cs, total_w, totals):
    # SSE up to a constant: -(S_L^2 / n_L + S_R^2 / n_R)
    (cr,) = cs
    (tr,) = totals
    rw = total_w - cw
    return -(cr * cr / cw + (tr - cr) ** 2 / rw)


def _grow_classification_tree(x, y, weights, mtry, max_depth, min_leaf, rng) -> Tree:
    b = _TreeBuilder()
    p = x.shape[1]
    root_rows = np.flatnonzero(weights > 0)
    stack = [(root_rows, 0, None, False)]
    while stack:
        rows, depth, parent, is_right = stack.pop()
        w = weights[rows]
        total = w.sum()
        pos = (w * y[rows]).sum()
        leaf_value = pos / total
        split = None
        pure = pos == 0 or pos == total
        if not pure and (max_depth is None or depth < max_depth):
            feats = np.sort(rng.choice(p, size=mtry, replace=False))
            split = _best_split(
                x[np.ix_(rows, feats)], w, [w * y[rows]], min_leaf, _gini_score
            )
        if split is None:
            i = b.add(LEAF, 0.0, leaf_value, 0.0)
        else:
            col, thr, child_impurity = split
            f = int(feats[col])
            node_impurity = 2.0 * pos * (total - pos) / total
            i = b.add(f, thr, leaf_value, node_impurity - child_impurity)
        if parent is not None:
            (b.right if is_right else b.left)[parent] = i
        if split is not None:
            go_left = x[rows, f] <= thr
            stack.append((rows[~go_left], depth + 1, i, True))
            stack.append((rows[go_left], depth + 1, i, False))
    return b.build()


def _grow_regression_tree(x, resid, hess, rows, max_depth, min_leaf) -> Tree:
    b = _TreeBuilder()
    all_feats = np.arange(x.shape[1])
    stack = [(rows, 0, None, False)]
    while stack:
        rows, depth, parent, is_right = stack.pop()
        r = resid[rows]
        leaf_value = r.sum() / max(hess[rows].sum(), 1e-12)
        split = None
        if (max_depth is None or depth < max_depth) and np.ptp(r) > 0:
            split = _best_split(
                x[rows], np.ones(len(rows)), [r], min_leaf, _sse_score
            )
            if split is not None:
                parent_score = -(r.sum() ** 2) / len(rows)
                if not split[2] < parent_score:
                    split = None
        if split is None:
            i = b.add(LEAF, 0.0, leaf_value, 0.0)
        else:
            col, thr, score = split
            f = int(all_feats[col])
            i = b.add(f, thr, leaf_value, parent_score - score)
        if parent is not None:
            (b.right if is_right else b.left)[parent] = i
        if split is not None:
            go_left = x[rows, f] <= thr
            stack.append((rows[~go_left], depth + 1, i, True))
            stack.append((rows[go_left], depth + 1, i, False))
    return b.build()


def _check_training_data(d: Dataset):
    if d.n == 0 or d.p == 0:
        raise DataError("empty dataset")


def train_rf(
    d: Dataset,
    n_trees: int = 1000,
    mtry: int | None = None,
    max_depth: int | None = None,
    min_leaf: int = 1,
    seed: int = 0,
) -> Forest:
    """Random forest: bootstrap resamples, ``mtry`` candidate features per node, Gini splits."""
    _check_training_data(d)
    if d.n < 2:
        raise DataError("random forest needs at least 2 samples")
    if mtry is None:
        mtry = max(1, math.isqrt(d.p))
    if not 1 <= mtry <= d.p:
        raise DataError(f"mtry={mtry} must lie in [1, p={d.p}]")
    y = d.y.astype(np.float64)
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        counts = np.bincount(rng.integers(0, d.n, size=d.n), minlength=d.n).astype(np.float64)
        trees.append(_grow_classification_tree(d.x, y, counts, mtry, max_depth, min_leaf, rng))
    params = {"n_trees": n_trees, "mtry": mtry, "max_depth": max_depth,
              "min_leaf": min_leaf, "seed": seed}
    return Forest("RF", trees, d.p, params=params)


def _logistic_loss(y, f):
    # mean of log(1 + e^f) - y f, stable for large |f|
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def train_gbm(
    d: Dataset,
    n_trees: int = 100,
    learning_rate: float = 0.1,
    max_depth: int | None = 5,
    subsample: float = 1.0,
    min_leaf: int = 1,
    seed: int = 0,
) -> Forest:
    """Gradient boosting on logistic loss with one Newton step per leaf."""
    _check_training_data(d)
    if learning_rate <= 0:
        raise DataError(f"learning_rate must be positive, got {learning_rate}")
    if not 0.0 < subsample <= 1.0:
        raise DataError(f"subsample must lie in (0, 1], got {subsample}")
    y = d.y.astype(np.float64)
    rate = y.mean()
    if rate in (0.0, 1.0):
        raise DataError("gradient boosting needs both classes present")
    base = math.log(rate / (1.0 - rate))
    f = np.full(d.n, base)
    loss = [_logistic_loss(y, f)]
    trees = []
    n_sub = max(1, int(round(subsample * d.n)))
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = np.arange(d.n) if n_sub == d.n else np.sort(rng.choice(d.n, n_sub, replace=False))
        q = sigmoid(f)
        tree = _grow_regression_tree(d.x, y - q, q * (1.0 - q), rows, max_depth, min_leaf)
        trees.append(tree)
        f = f + learning_rate * tree.predict(d.x)
        loss.append(_logistic_loss(y, f))
    params = {"n_trees": n_trees, "learning_rate": learning_rate, "max_depth": max_depth,
              "subsample": subsample, "min_leaf": min_leaf, "seed": seed}
    return Forest("GBM", trees, d.p, learning_rate, base, params, loss)


def predict_proba(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Class-1 probability for every row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != forest.n_features:
        raise DataError(
            f"expected {forest.n_features} columns, got array of shape {x.shape}"
        )
    if forest.kind == "RF":
        if not forest.trees:
            raise DataError("random forest has no trees")
        total = np.zeros(x.shape[0])
        for t in forest.trees:
            total += t.predict(x)
        return total / forest.n_trees
    raw = np.full(x.shape[0], forest.base_score)
    if forest.trees:
        raw += forest.learning_rate * np.sum([t.predict(x) for t in forest.trees], axis=0)
    return sigmoid(raw)


def used_features(forest: Forest) -> set[int]:
    out: set[int] = set()
    for t in forest.trees:
        out.update(int(f) for f in t.feature[t.feature != LEAF])
    return out


def feature_importances(forest: Forest) -> np.ndarray:
    """Total split gain per feature, normalized to sum to 1 (zeros if no splits)."""
    imp = np.zeros(forest.n_features)
    for t in forest.trees:
        internal = t.feature != LEAF
        np.add.at(imp, t.feature[internal], t.gain[internal])
    total = imp.sum()
    return imp / total if total > 0 else imp
