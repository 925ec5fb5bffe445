"""Random forest classifier grown from scratch.

Each tree is fit on a bootstrap resample; splits are chosen greedily by
Gini impurity decrease over a per-split random feature subset, growing
until nodes are pure or too small.  Trees are stored as flat parallel
arrays (feature, threshold, children, leaf class probabilities) so
prediction is a vectorized index walk and serialization is direct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..seeding import derive_seed

DEFAULT_N_TREES = 500
DEFAULT_MIN_LEAF = 1

LEAF = -1


def default_mtry(n_features: int) -> int:
    return max(1, int(np.sqrt(n_features)))


@dataclass
class Tree:
    feature: np.ndarray  # int per node, LEAF marks a leaf
    threshold: np.ndarray  # go left iff value <= threshold
    left: np.ndarray
    right: np.ndarray
    class_probs: np.ndarray  # (n_nodes, 2): [P(negative), P(positive)]
    bootstrap_seed: int

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row."""
        node = np.zeros(X.shape[0], dtype=int)
        while True:
            feats = self.feature[node]
            rows = np.flatnonzero(feats != LEAF)
            if rows.size == 0:
                return node
            f = feats[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def prob_positive(self, X: np.ndarray) -> np.ndarray:
        return self.class_probs[self.apply(X), 1]


@dataclass
class RandomForestModel:
    trees: list[Tree]
    n_trees: int
    mtry: int
    min_leaf: int
    seed: int
    n_train: int

    def raw_scores(self, X: np.ndarray, manifest=None) -> np.ndarray:
        return self.predict_proba(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Mean of per-tree leaf probabilities for the positive class."""
        X = np.asarray(X, dtype=float)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.prob_positive(X)
        return total / len(self.trees)

    def predict_class(self, X: np.ndarray) -> np.ndarray:
        """Majority vote over per-tree hard classifications (the mode).

        A leaf votes positive iff its positive probability is >= 0.5; an
        even forest split falls back to the mean probability.
        """
        X = np.asarray(X, dtype=float)
        votes = np.zeros(X.shape[0], dtype=int)
        for tree in self.trees:
            votes += (tree.prob_positive(X) >= 0.5).astype(int)
        half = len(self.trees) / 2.0
        tie_break = (self.predict_proba(X) >= 0.5).astype(int)
        return np.where(votes > half, 1, np.where(votes < half, 0, tie_break))


def bootstrap_indices(bootstrap_seed: int, n: int) -> np.ndarray:
    """The exact resample a tree was grown on (first draw of its stream)."""
    return np.random.default_rng(bootstrap_seed).integers(0, n, size=n)


def _best_split_for_feature(values: np.ndarray, labels: np.ndarray, min_leaf: int):
    """Best (weighted child gini, threshold) cut of one feature, or None.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values; cuts leaving fewer than min_leaf rows on either side are
    skipped.
    """
    n = values.size
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ls = labels[order]

    cut_ok = vs[:-1] < vs[1:]
    left_n = np.arange(1, n)
    if min_leaf > 1:
        cut_ok &= (left_n >= min_leaf) & (n - left_n >= min_leaf)
    if not cut_ok.any():
        return None

    left_pos = np.cumsum(ls)[:-1].astype(float)
    right_pos = ls.sum() - left_pos
    right_n = n - left_n
    p_l = left_pos / left_n
    p_r = right_pos / right_n
    weighted = (left_n * 2.0 * p_l * (1.0 - p_l) + right_n * 2.0 * p_r * (1.0 - p_r)) / n

    weighted = np.where(cut_ok, weighted, np.inf)
    best = int(np.argmin(weighted))  # lowest cut index on ties
    threshold = (vs[best] + vs[best + 1]) / 2.0
    return float(weighted[best]), float(threshold)


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    mtry: int,
    min_leaf: int,
    bootstrap_seed: int,
) -> Tree:
    n_features = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    probs: list[tuple[float, float]] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        probs.append((0.0, 0.0))
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        labels = y[idx]
        n_pos = int(labels.sum())
        probs[node] = (1.0 - n_pos / idx.size, n_pos / idx.size)

        if n_pos == 0 or n_pos == idx.size or idx.size < 2 * min_leaf:
            continue

        # Sample mtry candidate features; if none of them admits a valid
        # cut (all constant within the node), fall back to the remaining
        # features in shuffled order before giving up on the node.
        candidates = rng.choice(n_features, size=mtry, replace=False)
        rest = np.setdiff1d(np.arange(n_features), candidates)
        fallback = rng.permutation(rest) if rest.size else rest

        best = None  # (weighted_gini, feature, threshold)
        for f in candidates:
            found = _best_split_for_feature(X[idx, f], labels, min_leaf)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            for f in fallback:
                found = _best_split_for_feature(X[idx, f], labels, min_leaf)
                if found is not None:
                    best = (found[0], int(f), found[1])
                    break
        if best is None:
            continue  # identical rows with mixed labels: stay a leaf

        _, f, thr = best
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left[node], idx[go_left]))
        stack.append((right[node], idx[~go_left]))

    return Tree(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        class_probs=np.array(probs, dtype=float),
        bootstrap_seed=bootstrap_seed,
    )


def train_random_forest(
    X: np.ndarray,
    y_labels,
    n_trees: int = DEFAULT_N_TREES,
    mtry: int | None = None,
    min_leaf: int = DEFAULT_MIN_LEAF,
    seed: int = 0,
) -> RandomForestModel:
    """Grow the forest; fully deterministic given (data, hyperparameters, seed).

    A single-class training set is permitted and yields constant
    single-leaf trees, which is the degenerate but well-defined limit of
    the vote.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y_labels, dtype=int)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, p = X.shape
    if mtry is None:
        mtry = default_mtry(p)
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must be in [1, {p}]")

    trees = []
    for t in range(n_trees):
        tree_seed = derive_seed(seed, "tree", t)
        rng = np.random.default_rng(tree_seed)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], rng, mtry, min_leaf, tree_seed))
    return RandomForestModel(
        trees=trees, n_trees=n_trees, mtry=mtry, min_leaf=min_leaf, seed=seed, n_train=n
    )
