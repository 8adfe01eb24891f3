"""Random-forest meta-learner: CART trees, Gini splits, bootstrap bagging.

Determinism is part of the contract: per-tree RNG streams derive from the
forest seed and the tree index, split ties break on lowest feature index
then lowest threshold, and vote ties go to the attack class (a missed
attack costs more than a false alarm). Trees grow until leaves are pure
or unsplittable unless a depth cap is set.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .util import rng_stream


@dataclass
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None  # None = unrestricted
    features_per_split: int | None = None  # None = ceil(sqrt(d))
    seed: int = 0


def gini(counts) -> float:
    """Impurity 1 - sum((n_k/n)^2) of a two-class count pair."""
    c0, c1 = float(counts[0]), float(counts[1])
    if c0 < 0 or c1 < 0 or c0 + c1 == 0:
        raise ValueError(f"invalid class counts {counts!r}")
    total = c0 + c1
    return 1.0 - (c0 / total) ** 2 - (c1 / total) ** 2


@dataclass
class TreeNode:
    counts: tuple[int, int]
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _best_split(X, y, sample_idx, feature_order):
    """Lowest weighted-Gini (feature, threshold) among candidates, or None.

    Candidate thresholds sit at midpoints between consecutive sorted unique
    values. Strict improvement comparisons plus ordered iteration implement
    the lowest-feature-then-lowest-threshold tie rule.
    """
    n_node = sample_idx.size
    best = None
    for f in feature_order:
        values = X[sample_idx, f]
        uniq = np.unique(values)
        if uniq.size < 2:
            continue
        thresholds = 0.5 * (uniq[:-1] + uniq[1:])
        order = np.argsort(values, kind="stable")
        sorted_y = y[sample_idx][order]
        sorted_v = values[order]
        pos_prefix = np.cumsum(sorted_y)
        total_pos = pos_prefix[-1]
        # left size for each threshold = count of values below it
        left_sizes = np.searchsorted(sorted_v, thresholds, side="right")
        for t, n_left in zip(thresholds, left_sizes):
            n_right = n_node - n_left
            if n_left == 0 or n_right == 0:
                continue
            pos_left = pos_prefix[n_left - 1]
            pos_right = total_pos - pos_left
            g_left = gini((n_left - pos_left, pos_left))
            g_right = gini((n_right - pos_right, pos_right))
            cost = (n_left * g_left + n_right * g_right) / n_node
            if best is None or cost < best[0] - 1e-15:
                best = (cost, int(f), float(t))
    return best


def _grow(X, y, sample_idx, depth, max_depth, k_features, rng) -> TreeNode:
    pos = int(y[sample_idx].sum())
    counts = (int(sample_idx.size - pos), pos)
    node = TreeNode(counts=counts)
    if counts[0] == 0 or counts[1] == 0:
        return node
    if max_depth is not None and depth >= max_depth:
        return node
    d = X.shape[1]
    subset = np.sort(rng.permutation(d)[:k_features])
    best = _best_split(X, y, sample_idx, subset)
    if best is None and k_features < d:
        rest = np.setdiff1d(np.arange(d), subset)
        best = _best_split(X, y, sample_idx, rest)
    if best is None:
        return node  # duplicate feature rows with conflicting labels
    _, node.feature, node.threshold = best
    goes_left = X[sample_idx, node.feature] < node.threshold
    node.left = _grow(X, y, sample_idx[goes_left], depth + 1, max_depth, k_features, rng)
    node.right = _grow(X, y, sample_idx[~goes_left], depth + 1, max_depth, k_features, rng)
    return node


@dataclass
class Forest:
    config: ForestConfig
    trees: list[TreeNode] = field(default_factory=list)
    n_features: int = 0


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig) -> Forest:
    """Bootstrap-bagged trees; fully reproducible from config.seed."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).ravel().astype(np.int64)
    if X.shape[0] < 2:
        raise DataError("need at least 2 samples to fit a forest")
    if not np.all(np.isin(y, (0, 1))):
        raise DataError("labels must be binary 0/1")
    if np.unique(y).size < 2:
        warnings.warn("single-class training labels: forest degenerates to a constant predictor")
    m, d = X.shape
    k = config.features_per_split or int(np.ceil(np.sqrt(d)))
    k = min(k, d)
    forest = Forest(config=config, n_features=d)
    for tree_idx in range(config.n_trees):
        rng = rng_stream(config.seed, tree_idx)
        boot = rng.integers(0, m, size=m)
        forest.trees.append(_grow(X, y, boot, 0, config.max_depth, k, rng))
    return forest


def _descend(node: TreeNode, x: np.ndarray) -> TreeNode:
    while not node.is_leaf:
        node = node.left if x[node.feature] < node.threshold else node.right
    return node


def forest_predict(forest: Forest, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Majority-vote labels (ties -> attack) and mean leaf attack-fractions."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} features, got {X.shape[1]}")
    n_trees = len(forest.trees)
    votes = np.zeros(X.shape[0], dtype=np.int64)
    fractions = np.zeros(X.shape[0])
    for tree in forest.trees:
        for i, x in enumerate(X):
            leaf = _descend(tree, x)
            c0, c1 = leaf.counts
            votes[i] += 1 if c1 >= c0 else 0
            fractions[i] += c1 / (c0 + c1)
    labels = (votes >= n_trees - votes).astype(np.int64)
    return labels, fractions / n_trees


# ---------------------------------------------------------------------------
# serialization: nested node document, exact round-trip


def _node_to_obj(node: TreeNode):
    if node.is_leaf:
        return {"counts": list(node.counts)}
    return {
        "counts": list(node.counts),
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj) -> TreeNode:
    node = TreeNode(counts=tuple(obj["counts"]))
    if "feature" in obj:
        node.feature = int(obj["feature"])
        node.threshold = float(obj["threshold"])
        node.left = _node_from_obj(obj["left"])
        node.right = _node_from_obj(obj["right"])
    return node


def forest_to_doc(forest: Forest) -> dict:
    return {
        "kind": "forest",
        "config": {
            "n_trees": forest.config.n_trees,
            "max_depth": forest.config.max_depth,
            "features_per_split": forest.config.features_per_split,
            "seed": forest.config.seed,
        },
        "n_features": forest.n_features,
        "trees": [_node_to_obj(t) for t in forest.trees],
    }


def forest_from_doc(doc: dict) -> Forest:
    if doc.get("kind") != "forest":
        raise ValueError("not a forest document")
    config = ForestConfig(**doc["config"])
    return Forest(
        config=config,
        trees=[_node_from_obj(t) for t in doc["trees"]],
        n_features=int(doc["n_features"]),
    )


def save_forest(path: str | Path, forest: Forest) -> None:
    Path(path).write_text(json.dumps(forest_to_doc(forest), sort_keys=True, indent=2) + "\n")


def load_forest(path: str | Path) -> Forest:
    return forest_from_doc(json.loads(Path(path).read_text()))
