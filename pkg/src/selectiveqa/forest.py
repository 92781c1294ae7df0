"""From-scratch random-forest binary classifier used as the calibrator.

Trees are CART-style with the Gini criterion.  Candidate thresholds are the
midpoints between consecutive distinct sorted feature values; a split is
taken only if it strictly decreases weighted Gini impurity.  Ties are broken
toward the lowest feature index, then the lowest threshold, which makes
training fully deterministic.

Every tree draws from its own RNG stream derived from ``(seed, tree_index)``,
so training with ``n_jobs > 1`` is bit-identical to serial training.

Persistence format (``save_forest``/``load_forest``): a JSON document with
fields ``format`` ("selectiveqa-forest"), ``version`` (currently 1),
``config``, ``feature_names`` and ``trees``; each tree stores flattened node
arrays ``feature`` (-1 marks a leaf), ``threshold``, ``left``, ``right``,
``prob`` (positive fraction of training rows at the node) and ``count``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CatalogMismatchError, DegenerateLabelsError, ForestFormatError
from .features import FeatureVector
from .seeding import derive_seed

FOREST_FORMAT = "selectiveqa-forest"
FOREST_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None  # None = unlimited
    min_samples_leaf: int = 1
    features_per_split: int | str = "sqrt"  # positive int or "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 or None")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if isinstance(self.features_per_split, str):
            if self.features_per_split != "sqrt":
                raise ValueError('features_per_split must be a positive int or "sqrt"')
        elif self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ForestConfig":
        return cls(**raw)


@dataclass
class DecisionTree:
    """Flattened node arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    prob: np.ndarray  # float64, positive fraction of training rows
    count: np.ndarray  # int64, training rows that reached the node

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf probability for each row of ``X``."""
        idx = np.zeros(len(X), dtype=np.int32)
        rows = np.arange(len(X))
        active = self.feature[idx] >= 0
        while active.any():
            a_idx = idx[active]
            a_rows = rows[active]
            go_left = X[a_rows, self.feature[a_idx]] <= self.threshold[a_idx]
            idx[active] = np.where(go_left, self.left[a_idx], self.right[a_idx])
            active = self.feature[idx] >= 0
        return self.prob[idx]

    def max_path_length(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        best = 0
        for i in range(len(self.feature)):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
            else:
                best = max(best, int(depth[i]))
        return best


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    config: ForestConfig
    feature_names: tuple[str, ...]


@dataclass(frozen=True)
class SplitCandidate:
    feature_index: int
    threshold: float
    impurity_decrease: float


@dataclass(frozen=True)
class GridSearchResult:
    best_config: ForestConfig
    best_forest: RandomForest
    val_auc: float


def gini(labels: Sequence[bool]) -> float:
    """Binary Gini impurity 2*p*(1-p); in [0, 0.5]."""
    n = len(labels)
    if n == 0:
        raise ValueError("gini of an empty label list is undefined")
    p = sum(bool(v) for v in labels) / n
    return 2.0 * p * (1.0 - p)


def best_split(
    rows: np.ndarray,
    labels: Sequence[bool],
    candidate_features: Sequence[int],
    min_samples_leaf: int = 1,
) -> SplitCandidate | None:
    """Best (feature, midpoint threshold) by weighted Gini decrease.

    Returns ``None`` when no candidate yields a strictly positive decrease.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("rows must be a 2-D feature matrix")
    y = np.asarray(labels, dtype=np.int64)
    if len(X) < 2 * min_samples_leaf:
        raise ValueError("need at least 2*min_samples_leaf rows to split")
    return _best_split_idx(X, y, np.arange(len(X)), np.asarray(sorted(candidate_features)), min_samples_leaf)


def _best_split_idx(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    features: np.ndarray,
    min_samples_leaf: int,
) -> SplitCandidate | None:
    n = len(idx)
    y_node = y[idx]
    total_pos = int(y_node.sum())
    p_parent = total_pos / n
    g_parent = 2.0 * p_parent * (1.0 - p_parent)

    best: SplitCandidate | None = None
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y_node[order]
        boundaries = np.nonzero(sv[1:] != sv[:-1])[0] + 1  # left sizes
        if min_samples_leaf > 1:
            boundaries = boundaries[
                (boundaries >= min_samples_leaf) & (n - boundaries >= min_samples_leaf)
            ]
        if boundaries.size == 0:
            continue
        cum = np.cumsum(sy)
        n_l = boundaries.astype(np.float64)
        n_r = n - n_l
        pos_l = cum[boundaries - 1].astype(np.float64)
        pos_r = total_pos - pos_l
        p_l = pos_l / n_l
        p_r = pos_r / n_r
        g_l = 2.0 * p_l * (1.0 - p_l)
        g_r = 2.0 * p_r * (1.0 - p_r)
        decrease = g_parent - (n_l * g_l + n_r * g_r) / n
        j = int(np.argmax(decrease))  # first max -> lowest threshold
        if decrease[j] > 0.0 and (best is None or decrease[j] > best.impurity_decrease):
            k = int(boundaries[j])
            threshold = (sv[k - 1] + sv[k]) / 2.0
            best = SplitCandidate(int(f), float(threshold), float(decrease[j]))
    return best


def _resolve_features_per_split(spec: int | str, n_features: int) -> int:
    if spec == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if spec > n_features:
        raise ValueError(
            f"features_per_split={spec} exceeds the {n_features}-feature catalog"
        )
    return int(spec)


def _build_tree(X: np.ndarray, y: np.ndarray, config: ForestConfig, tree_seed: int) -> DecisionTree:
    rng = np.random.default_rng(tree_seed)
    n, d = X.shape
    m = _resolve_features_per_split(config.features_per_split, d)
    if config.bootstrap:
        rows = rng.choice(n, size=n, replace=True)
    else:
        rows = np.arange(n)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    prob: list[float] = []
    count: list[int] = []

    def new_node(idx: np.ndarray) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        pos = int(y[idx].sum())
        prob.append(pos / len(idx))
        count.append(len(idx))
        return node

    # Depth-first, left child first: the per-node RNG draws (feature
    # subsampling) then follow a fixed order independent of scheduling.
    root = new_node(rows)
    stack: list[tuple[int, np.ndarray, int]] = [(root, rows, 0)]
    msl = config.min_samples_leaf
    while stack:
        node, idx, depth = stack.pop()
        n_node = len(idx)
        pos = int(y[idx].sum())
        if (
            pos == 0
            or pos == n_node
            or n_node < 2 * msl
            or (config.max_depth is not None and depth >= config.max_depth)
        ):
            continue  # leaf
        if m < d:
            feats = np.sort(rng.choice(d, size=m, replace=False))
        else:
            feats = np.arange(d)
        cand = _best_split_idx(X, y, idx, feats, msl)
        if cand is None:
            continue  # leaf: no positive-gain split among sampled features
        vals = X[idx, cand.feature_index]
        order = np.argsort(vals, kind="stable")
        k = int(np.searchsorted(vals[order], cand.threshold, side="right"))
        if k == 0 or k == n_node:
            continue  # midpoint collapsed onto a value (adjacent floats); keep leaf
        left_idx = idx[order[:k]]
        right_idx = idx[order[k:]]
        feature[node] = cand.feature_index
        threshold[node] = cand.threshold
        left_node = new_node(left_idx)
        right_node = new_node(right_idx)
        left[node] = left_node
        right[node] = right_node
        stack.append((right_node, right_idx, depth + 1))
        stack.append((left_node, left_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        prob=np.asarray(prob, dtype=np.float64),
        count=np.asarray(count, dtype=np.int64),
    )


def train_forest(
    features: np.ndarray,
    labels: Sequence[bool],
    config: ForestConfig,
    feature_names: Sequence[str] | None = None,
    n_jobs: int = 1,
) -> RandomForest:
    """Train ``config.n_trees`` CART trees on bootstrap resamples.

    The result is a pure function of (features, labels, config); ``n_jobs``
    only controls wall-clock parallelism.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise ValueError("need a 2-D feature matrix with at least 2 rows")
    y = np.asarray(labels, dtype=np.int64)
    if len(y) != len(X):
        raise ValueError("features and labels must have equal length")
    if y.min() == y.max():
        raise DegenerateLabelsError("degenerate labels: training data has a single class")
    _resolve_features_per_split(config.features_per_split, X.shape[1])
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    seeds = [derive_seed(config.seed, "tree", t) for t in range(config.n_trees)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(lambda s: _build_tree(X, y, config, s), seeds))
    else:
        trees = [_build_tree(X, y, config, s) for s in seeds]
    return RandomForest(trees=trees, config=config, feature_names=tuple(feature_names))


def predict_proba_matrix(forest: RandomForest, X: np.ndarray) -> np.ndarray:
    """Mean leaf probability across trees for every row of ``X``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(forest.feature_names):
        raise CatalogMismatchError(
            f"feature matrix has {X.shape[-1]} columns, forest expects "
            f"{len(forest.feature_names)}"
        )
    out = np.zeros(len(X), dtype=np.float64)
    for tree in forest.trees:
        out += tree.predict(X)
    return out / len(forest.trees)


def predict_proba(forest: RandomForest, fv: FeatureVector) -> float:
    """Predicted probability of the positive class for one feature vector."""
    if fv.names != forest.feature_names:
        raise CatalogMismatchError(
            f"feature vector catalog {list(fv.names)} does not match the "
            f"forest catalog {list(forest.feature_names)}"
        )
    return float(predict_proba_matrix(forest, np.asarray([fv.values]))[0])


def grid_search(
    train_features: np.ndarray,
    train_labels: Sequence[bool],
    val_features: np.ndarray,
    val_records: Sequence,
    grid: Sequence[ForestConfig],
    feature_names: Sequence[str] | None = None,
    n_jobs: int = 1,
) -> GridSearchResult:
    """Pick the grid config whose forest minimizes validation selective AUC.

    ``val_records`` supply the correctness labels and the ids used for the
    deterministic confidence tie-break.  Ties between configs go to the
    earliest grid position.
    """
    from .confidence import ScoredRecord
    from .evaluation import auc, risk_coverage_curve

    if len(grid) == 0:
        raise ValueError("grid must be non-empty")
    val_correct = [r.correct for r in val_records]
    if all(val_correct) or not any(val_correct):
        raise DegenerateLabelsError(
            "validation set needs both correct and incorrect records"
        )
    best: GridSearchResult | None = None
    for config in grid:
        forest = train_forest(train_features, train_labels, config, feature_names, n_jobs)
        confidences = predict_proba_matrix(forest, val_features)
        scored = [ScoredRecord(r, float(c)) for r, c in zip(val_records, confidences)]
        val_auc = auc(risk_coverage_curve(scored))
        if best is None or val_auc < best.val_auc:
            best = GridSearchResult(config, forest, val_auc)
    assert best is not None
    return best


DEFAULT_GRID: tuple[ForestConfig, ...] = tuple(
    ForestConfig(
        n_trees=n_trees,
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        features_per_split="sqrt",
        bootstrap=True,
    )
    for n_trees in (100, 300)
    for max_depth in (4, 8, None)
    for min_samples_leaf in (1, 5, 25)
)


def save_forest(forest: RandomForest, path: str | Path) -> None:
    doc = {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "config": forest.config.to_dict(),
        "feature_names": list(forest.feature_names),
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "prob": tree.prob.tolist(),
                "count": tree.count.tolist(),
            }
            for tree in forest.trees
        ],
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_forest(path: str | Path) -> RandomForest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ForestFormatError(f"{path}: malformed forest file ({exc.msg})") from exc
    if not isinstance(doc, dict) or doc.get("format") != FOREST_FORMAT:
        raise ForestFormatError(f"{path}: not a {FOREST_FORMAT} file")
    if doc.get("version") != FOREST_VERSION:
        raise ForestFormatError(
            f"{path}: unsupported forest version {doc.get('version')!r}, "
            f"expected {FOREST_VERSION}"
        )
    try:
        config = ForestConfig.from_dict(doc["config"])
        trees = [
            DecisionTree(
                feature=np.asarray(t["feature"], dtype=np.int32),
                threshold=np.asarray(t["threshold"], dtype=np.float64),
                left=np.asarray(t["left"], dtype=np.int32),
                right=np.asarray(t["right"], dtype=np.int32),
                prob=np.asarray(t["prob"], dtype=np.float64),
                count=np.asarray(t["count"], dtype=np.int64),
            )
            for t in doc["trees"]
        ]
        names = tuple(doc["feature_names"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ForestFormatError(f"{path}: malformed forest file ({exc})") from exc
    if len(trees) != config.n_trees:
        raise ForestFormatError(f"{path}: tree count does not match config")
    return RandomForest(trees=trees, config=config, feature_names=names)
