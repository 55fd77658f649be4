"""Seed-deterministic random forest for binary labels with Gini importance.

Trees are grown on bootstrap samples; each node draws `features_per_split`
candidate columns from its tree's named stream and scans them in ascending
column order, so equal impurity decreases resolve toward the lowest column
index and the lowest threshold.  Importance is mean decrease in impurity
(weighted by node size, averaged over trees, normalized to sum 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from abaf import backend
from abaf import rng as rng_mod


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 100
    max_depth: int | None = None
    features_per_split: int | None = None  # None -> floor(sqrt(d))
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")


def _scan_feature_np(v: np.ndarray, t: np.ndarray, min_leaf: int):
    """Best split of one sorted feature: (impurity decrease, threshold).

    v is sorted ascending, t the 0/1 labels in that order.  Returns
    (-1.0, 0.0) when no valid position exists.  Decrease is the parent Gini
    minus the size-weighted child Ginis.
    """
    n = v.size
    total1 = float(t.sum())
    p1 = total1 / n
    gini_node = 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)

    i = np.arange(1, n)  # left child size at each split position
    c1l = np.cumsum(t, dtype=np.float64)[:-1]
    valid = (i >= min_leaf) & (i <= n - min_leaf) & (v[1:] > v[:-1])
    if not valid.any():
        return -1.0, 0.0
    nl = i.astype(np.float64)
    nr = n - nl
    c1r = total1 - c1l
    gl = 1.0 - (c1l / nl) ** 2 - ((nl - c1l) / nl) ** 2
    gr = 1.0 - (c1r / nr) ** 2 - ((nr - c1r) / nr) ** 2
    dec = gini_node - (nl / n) * gl - (nr / n) * gr
    dec[~valid] = -np.inf
    best = int(np.argmax(dec))  # first maximum -> lowest threshold
    return float(dec[best]), float(0.5 * (v[best] + v[best + 1]))


if backend.HAS_NUMBA:
    import numba

    @numba.njit(cache=True)
    def _scan_feature_nb(v, t, min_leaf):  # pragma: no cover - mirrors numpy path
        n = v.size
        total1 = 0.0
        for j in range(n):
            total1 += t[j]
        p1 = total1 / n
        gini_node = 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
        best_dec = -1.0
        best_thr = 0.0
        c1l = 0.0
        for i in range(1, n):
            c1l += t[i - 1]
            if i < min_leaf or i > n - min_leaf or v[i] <= v[i - 1]:
                continue
            nl = float(i)
            nr = float(n - i)
            pl = c1l / nl
            pr = (total1 - c1l) / nr
            gl = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
            gr = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
            dec = gini_node - (nl / n) * gl - (nr / n) * gr
            if dec > best_dec:
                best_dec = dec
                best_thr = 0.5 * (v[i - 1] + v[i])
        return best_dec, best_thr

    _scan_feature = backend.select(_scan_feature_np, _scan_feature_nb)
else:
    _scan_feature = _scan_feature_np


class _Tree:
    """Flat-array decision tree; feature -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "leaf_p1")

    def __init__(self, feature, threshold, left, right, leaf_p1):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.leaf_p1 = np.asarray(leaf_p1, dtype=np.float64)

    def route(self, x: np.ndarray) -> np.ndarray:
        """Leaf class-1 fraction per row of x."""
        idx = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        while True:
            f = self.feature[idx]
            internal = f >= 0
            if not internal.any():
                return self.leaf_p1[idx]
            f_safe = np.where(internal, f, 0)
            go_left = x[rows, f_safe] <= self.threshold[idx]
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(internal, nxt, idx)


class Forest:
    def __init__(self, trees: list[_Tree], importances: np.ndarray, cfg: RfConfig):
        self.trees = trees
        self.importances = importances
        self.cfg = cfg


def _grow_tree(x, y, cfg, tree_rng, n_features, importance_acc):
    feature, threshold, left, right, leaf_p1 = [], [], [], [], []
    m_try = cfg.features_per_split or max(1, int(np.sqrt(n_features)))
    m_try = min(m_try, n_features)
    n_total = y.size

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_p1.append(0.0)
        return len(feature) - 1

    def build(rows: np.ndarray, depth: int) -> int:
        node = new_node()
        yr = y[rows]
        n = rows.size
        p1 = float(yr.mean())
        leaf_p1[node] = p1
        if (
            p1 == 0.0
            or p1 == 1.0
            or n < 2 * cfg.min_leaf
            or (cfg.max_depth is not None and depth >= cfg.max_depth)
        ):
            return node

        candidates = np.sort(tree_rng.choice(n_features, size=m_try, replace=False))
        best_dec, best_f, best_thr = 0.0, -1, 0.0
        for f in candidates:
            vals = x[rows, f]
            order = np.argsort(vals, kind="stable")
            dec, thr = _scan_feature(
                vals[order], yr[order].astype(np.float64), cfg.min_leaf
            )
            if dec > best_dec:
                best_dec, best_f, best_thr = dec, int(f), thr
        if best_f < 0:
            return node

        go_left = x[rows, best_f] <= best_thr
        importance_acc[best_f] += (n / n_total) * best_dec
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = build(rows[go_left], depth + 1)
        right[node] = build(rows[~go_left], depth + 1)
        return node

    build(np.arange(y.size), 0)
    return _Tree(feature, threshold, left, right, leaf_p1)


def random_forest_fit(x: np.ndarray, y: np.ndarray, cfg: RfConfig) -> Forest:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError(f"expected (n, d) features for {y.size} labels, got {x.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least two samples")
    if not np.isin(y, (0, 1)).all() or y.min() == y.max():
        raise ValueError("labels must be binary 0/1 with both classes present")

    n, d = x.shape
    imp_total = np.zeros(d)
    trees = []
    for i in range(cfg.n_trees):
        t_rng = rng_mod.stream(cfg.seed, f"rf/tree{i}")
        boot = t_rng.integers(0, n, size=n)
        imp_tree = np.zeros(d)
        trees.append(_grow_tree(x[boot], y[boot], cfg, t_rng, d, imp_tree))
        imp_total += imp_tree
    imp = imp_total / cfg.n_trees
    total = imp.sum()
    if total > 0.0:
        imp = imp / total
    return Forest(trees, imp, cfg)


def rf_importance(forest: Forest) -> np.ndarray:
    return forest.importances.copy()


def predict_proba(forest: Forest, x: np.ndarray) -> np.ndarray:
    """Mean leaf class-1 fraction over trees."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n, d) features, got {x.shape}")
    acc = np.zeros(x.shape[0])
    for tree in forest.trees:
        acc += tree.route(x)
    return acc / len(forest.trees)


def predict(forest: Forest, x: np.ndarray) -> np.ndarray:
    return (predict_proba(forest, x) >= 0.5).astype(np.int64)
