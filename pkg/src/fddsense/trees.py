"""Binary CART trees for multiclass classification and gradient regression.

Split finding ranks candidates by the sufficient statistic
g = sum(left_counts^2)/n_left + sum(right_counts^2)/n_right (classification)
or g = (sum_left y)^2/n_left + (sum_right y)^2/n_right (regression), both of
which order splits identically to weighted impurity decrease / variance
reduction but cost one addition and two divisions per candidate.  Ties are
broken toward the lowest feature index, then the lowest threshold, so a
sequential scan and a concurrent one select the same split.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyInputError,
    EmptyNodeError,
    NonFiniteInputError,
)

CLASSIFICATION = "classification"
REGRESSION = "regression_on_gradients"

EXACT = "exact"
HISTOGRAM = "histogram"


@dataclass(frozen=True)
class TreeConfig:
    """Growth limits and split-finding strategy for one tree.

    feature_subsample is the size of the random feature subset drawn at
    every node; None means all features, and a value larger than the
    available feature count is clamped to it.  histogram_bins is consulted
    only when split_strategy is "histogram".
    """

    max_depth: int | None = None
    min_leaf: int = 1
    feature_subsample: int | None = None
    split_strategy: str = EXACT
    histogram_bins: int = 64
    task: str = CLASSIFICATION

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.split_strategy not in (EXACT, HISTOGRAM):
            raise ValueError(f"unknown split_strategy {self.split_strategy!r}")
        if self.split_strategy == HISTOGRAM and self.histogram_bins < 2:
            raise ValueError("histogram_bins must be >= 2")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class SplitCandidate:
    """An accepted split: routing rule plus its recorded quality numbers.

    impurity_decrease is the node-local decrease (Gini for classification,
    per-sample variance for regression); gain is the same quantity scaled
    by the node's sample count, i.e. the total reduction in the objective.
    """

    feature_index: int
    threshold: float
    impurity_decrease: float
    gain: float
    left_count: int
    right_count: int

    @property
    def n_samples(self) -> int:
        return self.left_count + self.right_count


@dataclass
class Leaf:
    n_samples: int
    distribution: np.ndarray | None = None  # classification: probs over K classes
    value: float | None = None  # regression: mean target


@dataclass
class Internal:
    split: SplitCandidate
    left: "Internal | Leaf"
    right: "Internal | Leaf"


@dataclass(frozen=True)
class SplitRecord:
    """One split_log entry: per-feature importance bookkeeping.

    weight is the node's share of the root's samples, used for the
    sample-weighted impurity-importance convention.
    """

    feature_index: int
    impurity_decrease: float
    gain: float
    weight: float


@dataclass
class DecisionTree:
    root: Internal | Leaf
    n_features: int
    config: TreeConfig
    n_classes: int | None = None  # None for regression trees

    @property
    def split_log(self) -> list[SplitRecord]:
        """All internal nodes in preorder as importance records."""
        root_n = _node_samples(self.root)
        records: list[SplitRecord] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                continue
            records.append(
                SplitRecord(
                    feature_index=node.split.feature_index,
                    impurity_decrease=node.split.impurity_decrease,
                    gain=node.split.gain,
                    weight=node.split.n_samples / root_n,
                )
            )
            stack.append(node.right)
            stack.append(node.left)
        return records

    def predict_batch(self, x: np.ndarray) -> np.ndarray:
        """Leaf outputs for a matrix of rows: (n, K) distributions for
        classification trees, (n,) values for regression trees."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected (n, {self.n_features}) matrix, got {x.shape}"
            )
        if x.size and not np.isfinite(x).all():
            raise NonFiniteInputError("prediction input contains NaN or Inf")
        n = x.shape[0]
        if self.n_classes is not None:
            out = np.empty((n, self.n_classes), dtype=np.float64)
        else:
            out = np.empty(n, dtype=np.float64)
        stack: list[tuple[Internal | Leaf, np.ndarray]] = [(self.root, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if isinstance(node, Leaf):
                out[idx] = node.distribution if self.n_classes is not None else node.value
                continue
            goes_left = x[idx, node.split.feature_index] <= node.split.threshold
            stack.append((node.left, idx[goes_left]))
            stack.append((node.right, idx[~goes_left]))
        return out


def _node_samples(node: Internal | Leaf) -> int:
    return node.n_samples if isinstance(node, Leaf) else node.split.n_samples


def gini_impurity(class_counts) -> float:
    """Gini impurity 1 - sum(p_i^2) of a node's class counts."""
    counts = np.asarray(class_counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise ValueError("class counts must be non-negative")
    total = int(counts.sum())
    if total == 0:
        raise EmptyNodeError("gini impurity of an empty node is undefined")
    return 1.0 - float(np.sum(counts * counts)) / (float(total) * float(total))


def _candidate_boundaries(sorted_x: np.ndarray, cfg: TreeConfig) -> np.ndarray:
    """Indices i such that a split between sorted_x[i] and sorted_x[i+1] is
    a candidate.  Exact mode takes every distinct-value boundary; histogram
    mode thins them to at most bins-1 evenly spaced ones, which leaves the
    candidate set unchanged whenever bins >= the number of distinct values.
    """
    boundaries = np.flatnonzero(sorted_x[:-1] < sorted_x[1:])
    if cfg.split_strategy == HISTOGRAM and boundaries.size > cfg.histogram_bins - 1:
        picks = np.round(
            np.linspace(0, boundaries.size - 1, cfg.histogram_bins - 1)
        ).astype(np.intp)
        boundaries = boundaries[np.unique(picks)]
    return boundaries


def _scan_feature_classification(
    x: np.ndarray, y: np.ndarray, n_classes: int, cfg: TreeConfig
):
    """Best candidate on one feature: (g, threshold, counts) or None."""
    n = x.shape[0]
    order = np.argsort(x)
    xs = x[order]
    boundaries = _candidate_boundaries(xs, cfg)
    if boundaries.size == 0:
        return None
    n_left = boundaries + 1
    ok = (n_left >= cfg.min_leaf) & (n - n_left >= cfg.min_leaf)
    boundaries, n_left = boundaries[ok], n_left[ok]
    if boundaries.size == 0:
        return None

    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y[order]] = 1
    cum = np.cumsum(onehot, axis=0)
    left = cum[boundaries]
    right = cum[-1] - left
    n_right = n - n_left
    g = np.sum(left * left, axis=1) / n_left + np.sum(right * right, axis=1) / n_right
    best = int(np.argmax(g))  # first max: lowest threshold wins ties
    threshold = (xs[boundaries[best]] + xs[boundaries[best] + 1]) / 2
    return float(g[best]), float(threshold), int(n_left[best]), int(n_right[best])


def _scan_feature_regression(x: np.ndarray, y: np.ndarray, cfg: TreeConfig):
    n = x.shape[0]
    order = np.argsort(x)
    xs = x[order]
    boundaries = _candidate_boundaries(xs, cfg)
    if boundaries.size == 0:
        return None
    n_left = boundaries + 1
    ok = (n_left >= cfg.min_leaf) & (n - n_left >= cfg.min_leaf)
    boundaries, n_left = boundaries[ok], n_left[ok]
    if boundaries.size == 0:
        return None

    cum = np.cumsum(y[order])
    sum_left = cum[boundaries]
    sum_right = cum[-1] - sum_left
    n_right = n - n_left
    g = sum_left * sum_left / n_left + sum_right * sum_right / n_right
    best = int(np.argmax(g))
    threshold = (xs[boundaries[best]] + xs[boundaries[best] + 1]) / 2
    return float(g[best]), float(threshold), int(n_left[best]), int(n_right[best])


def _pick_features(n_features: int, cfg: TreeConfig, rng: np.random.Generator):
    m = cfg.feature_subsample
    if m is None or m >= n_features:
        return range(n_features)  # no draw: full-feature trees ignore the rng
    return np.sort(rng.choice(n_features, size=m, replace=False))


def fit_tree(
    x: np.ndarray,
    y: np.ndarray,
    cfg: TreeConfig,
    rng_seed: int = 0,
    n_classes: int | None = None,
) -> DecisionTree:
    """Grow one tree by greedy top-down search.

    Args:
        x: (n, f) feature matrix, finite.
        y: class ids (classification) or real targets (regression).
        cfg: growth limits and split strategy.
        rng_seed: drives per-node feature subsampling only.
        n_classes: class count for classification; inferred from y if None.

    Returns:
        DecisionTree.  All-constant features yield a single-leaf tree
        rather than an error.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be a 2-D matrix")
    n, n_features = x.shape
    if n < 2:
        raise EmptyInputError(f"need at least 2 rows to fit a tree, got {n}")
    if not np.isfinite(x).all():
        raise NonFiniteInputError("training matrix contains NaN or Inf")
    classify = cfg.task == CLASSIFICATION
    if classify:
        y = np.asarray(y, dtype=np.int64)
        if n_classes is None:
            n_classes = int(y.max()) + 1
    else:
        y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)

    def make_leaf(idx: np.ndarray) -> Leaf:
        if classify:
            counts = np.bincount(y[idx], minlength=n_classes)
            return Leaf(n_samples=idx.size, distribution=counts / idx.size)
        return Leaf(n_samples=idx.size, value=float(y[idx].mean()))

    def best_split(idx: np.ndarray) -> SplitCandidate | None:
        yy = y[idx]
        if classify:
            counts = np.bincount(yy, minlength=n_classes).astype(np.int64)
            g_parent = float(np.sum(counts * counts)) / idx.size
        else:
            s = float(yy.sum())
            g_parent = s * s / idx.size
        best = None
        best_g = g_parent  # accept only strictly positive decrease
        for j in _pick_features(n_features, cfg, rng):
            col = x[idx, j]
            found = (
                _scan_feature_classification(col, yy, n_classes, cfg)
                if classify
                else _scan_feature_regression(col, yy, cfg)
            )
            if found is None:
                continue
            g, threshold, left_count, right_count = found
            if g > best_g:
                best_g = g
                decrease = (g - g_parent) / idx.size
                best = SplitCandidate(
                    feature_index=int(j),
                    threshold=threshold,
                    impurity_decrease=decrease,
                    gain=g - g_parent,
                    left_count=left_count,
                    right_count=right_count,
                )
        return best

    placeholder = Leaf(n_samples=n)
    tree = DecisionTree(
        root=placeholder,
        n_features=n_features,
        config=cfg,
        n_classes=n_classes if classify else None,
    )

    # Explicit preorder stack: (row indices, depth, parent, side). Children
    # are pushed right-then-left so the rng is consumed left subtree first.
    stack: list[tuple[np.ndarray, int, Internal | None, str]] = [
        (np.arange(n), 0, None, "root")
    ]
    while stack:
        idx, depth, parent, side = stack.pop()
        node: Internal | Leaf
        pure = (
            (y[idx].min() == y[idx].max())
            if idx.size
            else True
        )
        depth_capped = cfg.max_depth is not None and depth >= cfg.max_depth
        if pure or depth_capped or idx.size < 2 * cfg.min_leaf:
            node = make_leaf(idx)
        else:
            split = best_split(idx)
            if split is None:
                node = make_leaf(idx)
            else:
                node = Internal(split=split, left=placeholder, right=placeholder)
                goes_left = x[idx, split.feature_index] <= split.threshold
                stack.append((idx[~goes_left], depth + 1, node, "right"))
                stack.append((idx[goes_left], depth + 1, node, "left"))
        if parent is None:
            tree.root = node
        elif side == "left":
            parent.left = node
        else:
            parent.right = node
    return tree


def predict_tree(tree: DecisionTree, row) -> np.ndarray | float:
    """Route one row to its leaf; returns the leaf distribution or value."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != tree.n_features:
        raise DimensionMismatchError(
            f"expected row of length {tree.n_features}, got shape {row.shape}"
        )
    if not np.isfinite(row).all():
        raise NonFiniteInputError("prediction row contains NaN or Inf")
    node = tree.root
    while isinstance(node, Internal):
        node = node.left if row[node.split.feature_index] <= node.split.threshold else node.right
    if tree.n_classes is not None:
        return node.distribution.copy()
    return node.value


def tree_importance_contributions(
    tree: DecisionTree, mode: str = "impurity", weighted: bool = True
) -> np.ndarray:
    """Per-feature sums over the tree's splits.

    mode "impurity" sums each split's impurity decrease, by default scaled
    by the node's share of the root samples (pass weighted=False for the
    plain unscaled sum); mode "gain" sums the absolute objective gains.
    """
    if mode not in ("impurity", "gain"):
        raise ValueError(f"unknown importance mode {mode!r}")
    out = np.zeros(tree.n_features, dtype=np.float64)
    for rec in tree.split_log:
        if mode == "gain":
            out[rec.feature_index] += rec.gain
        else:
            out[rec.feature_index] += rec.impurity_decrease * (rec.weight if weighted else 1.0)
    return out


def tree_to_dict(tree: DecisionTree) -> dict:
    """JSON-ready nested-node encoding of a tree."""

    def encode(node: Internal | Leaf) -> dict:
        if isinstance(node, Leaf):
            payload: dict = {"kind": "leaf", "n_samples": node.n_samples}
            if node.distribution is not None:
                payload["distribution"] = [float(p) for p in node.distribution]
            else:
                payload["value"] = node.value
            return payload
        return {
            "kind": "split",
            "feature": node.split.feature_index,
            "threshold": node.split.threshold,
            "impurity_decrease": node.split.impurity_decrease,
            "gain": node.split.gain,
            "left_count": node.split.left_count,
            "right_count": node.split.right_count,
            "left": encode(node.left),
            "right": encode(node.right),
        }

    return {
        "n_features": tree.n_features,
        "n_classes": tree.n_classes,
        "config": {
            "max_depth": tree.config.max_depth,
            "min_leaf": tree.config.min_leaf,
            "feature_subsample": tree.config.feature_subsample,
            "split_strategy": tree.config.split_strategy,
            "histogram_bins": tree.config.histogram_bins,
            "task": tree.config.task,
        },
        "root": encode(tree.root),
    }


def tree_from_dict(payload: dict) -> DecisionTree:
    def decode(node: dict) -> Internal | Leaf:
        if node["kind"] == "leaf":
            dist = node.get("distribution")
            return Leaf(
                n_samples=node["n_samples"],
                distribution=None if dist is None else np.asarray(dist, dtype=np.float64),
                value=node.get("value"),
            )
        split = SplitCandidate(
            feature_index=node["feature"],
            threshold=node["threshold"],
            impurity_decrease=node["impurity_decrease"],
            gain=node["gain"],
            left_count=node["left_count"],
            right_count=node["right_count"],
        )
        return Internal(split=split, left=decode(node["left"]), right=decode(node["right"]))

    cfg = TreeConfig(**payload["config"])
    return DecisionTree(
        root=decode(payload["root"]),
        n_features=payload["n_features"],
        config=cfg,
        n_classes=payload["n_classes"],
    )
