"""Tree ensembles: bootstrap-aggregated classifiers and additive boosting.

Bagging grows independent classification trees on bootstrap resamples and
averages leaf distributions (soft voting by default, majority voting on
request).  Boosting grows one regression tree per class per round on the
negative gradient of the softmax cross-entropy, starting from per-class
log-prior scores; it is first-order only, with a plain learning rate and
no per-leaf regularisation.

Every tree's randomness is derived from (master_seed, tree position), so
training is reproducible and independent of thread count and completion
order.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FAULT_CLASSES, Dataset
from .errors import (
    DimensionMismatchError,
    ModelFormatError,
    SchemaMismatchError,
    SingleClassError,
)
from .fileio import canonical_json, write_json
from .metrics import ClassReport, build_report
from .seeding import derive_seed
from .trees import (
    CLASSIFICATION,
    REGRESSION,
    DecisionTree,
    TreeConfig,
    fit_tree,
    tree_from_dict,
    tree_importance_contributions,
    tree_to_dict,
)

BAGGING = "bagging"
BOOSTING = "boosting"

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnsembleConfig:
    """Training recipe for one ensemble.

    n_trees counts trees for bagging and boosting rounds (each round adds
    one tree per class).  bootstrap applies to bagging only; boosting
    always fits on the full sample.  hard_vote switches bagging from
    distribution averaging to majority voting.
    """

    method: str = BAGGING
    n_trees: int = 30
    tree: TreeConfig = field(default_factory=TreeConfig)
    bootstrap: bool = True
    learning_rate: float = 0.3
    hard_vote: bool = False

    def __post_init__(self):
        if self.method not in (BAGGING, BOOSTING):
            raise ValueError(f"unknown ensemble method {self.method!r}")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.method == BOOSTING and not (0.0 < self.learning_rate <= 1.0):
            raise ValueError("learning_rate must be in (0, 1]")
        if self.method == BOOSTING and self.hard_vote:
            raise ValueError("hard_vote applies to bagging only")


def schema_fingerprint(feature_names: tuple[str, ...]) -> str:
    h = hashlib.blake2b(digest_size=8)
    for name in feature_names:
        h.update(name.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


@dataclass
class EnsembleModel:
    """A fitted ensemble plus the schema it was trained on.

    For boosting, trees are stored flat in (round, class) order, so tree
    r * n_classes + k is round r's tree for class k.
    """

    config: EnsembleConfig
    trees: list[DecisionTree]
    n_classes: int
    feature_names: tuple[str, ...]
    base_scores: np.ndarray | None = None  # boosting log priors, else None
    master_seed: int = 0

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.feature_names)

    def check_schema(self, feature_names: tuple[str, ...]) -> None:
        if tuple(feature_names) != self.feature_names:
            raise SchemaMismatchError(
                "model was trained on a different sensor set: "
                f"{self.feature_names} vs {tuple(feature_names)}"
            )


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _fit_bagged_tree(args) -> DecisionTree:
    x, y, cfg, master_seed, index, n_classes = args
    tree_cfg = replace(cfg.tree, task=CLASSIFICATION)
    if cfg.bootstrap:
        rng = np.random.default_rng(derive_seed(master_seed, index, "bootstrap"))
        rows = rng.integers(0, x.shape[0], size=x.shape[0])
        x, y = x[rows], y[rows]
    return fit_tree(
        x, y, tree_cfg, rng_seed=derive_seed(master_seed, index, "grow"), n_classes=n_classes
    )


def fit_ensemble(
    x: np.ndarray,
    y: np.ndarray,
    cfg: EnsembleConfig,
    master_seed: int,
    feature_names: tuple[str, ...],
    n_classes: int | None = None,
    n_threads: int = 1,
) -> EnsembleModel:
    """Train an ensemble on (x, y).

    Args:
        x: (n, f) feature matrix with columns matching feature_names.
        y: int class ids in [0, n_classes).
        cfg: ensemble recipe.
        master_seed: root of all derived per-tree seeds.
        feature_names: column symbols, stored for schema checks.
        n_classes: class count; inferred from y when None.
        n_threads: bagging parallelism; results do not depend on it.

    Returns:
        EnsembleModel ready for prediction and importance queries.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"x {x.shape} and y {y.shape} disagree on the row count"
        )
    if x.shape[1] != len(feature_names):
        raise DimensionMismatchError(
            f"{x.shape[1]} columns but {len(feature_names)} feature names"
        )
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if np.unique(y).size < 2:
        raise SingleClassError("training labels contain a single class")
    feature_names = tuple(feature_names)

    if cfg.method == BAGGING:
        jobs = [(x, y, cfg, master_seed, i, n_classes) for i in range(cfg.n_trees)]
        if n_threads > 1:
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                trees = list(pool.map(_fit_bagged_tree, jobs))
        else:
            trees = [_fit_bagged_tree(job) for job in jobs]
        return EnsembleModel(
            config=cfg,
            trees=trees,
            n_classes=n_classes,
            feature_names=feature_names,
            master_seed=master_seed,
        )

    # Boosting: additive softmax model, one regression tree per class per
    # round, fitted to residuals onehot - p.  Rounds are inherently
    # sequential, so n_threads is ignored here.
    tree_cfg = replace(cfg.tree, task=REGRESSION)
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    priors = np.where(counts > 0, counts, 0.5) / y.shape[0]
    base_scores = np.log(priors)
    scores = np.tile(base_scores, (x.shape[0], 1))
    onehot = np.zeros((x.shape[0], n_classes), dtype=np.float64)
    onehot[np.arange(x.shape[0]), y] = 1.0
    trees: list[DecisionTree] = []
    for round_index in range(cfg.n_trees):
        probs = _softmax(scores)
        residuals = onehot - probs
        for k in range(n_classes):
            tree = fit_tree(
                x,
                residuals[:, k],
                tree_cfg,
                rng_seed=derive_seed(master_seed, "boost", round_index, k),
            )
            trees.append(tree)
            scores[:, k] += cfg.learning_rate * tree.predict_batch(x)
    return EnsembleModel(
        config=cfg,
        trees=trees,
        n_classes=n_classes,
        feature_names=feature_names,
        base_scores=base_scores,
        master_seed=master_seed,
    )


def predict_scores(model: EnsembleModel, x: np.ndarray) -> np.ndarray:
    """(n, K) per-class scores.

    Bagging returns averaged leaf distributions (or vote fractions under
    hard_vote); boosting returns softmax probabilities of the additive
    scores.  Rows sum to 1 either way.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionMismatchError("prediction input must be a 2-D matrix")
    if model.config.method == BAGGING:
        if model.config.hard_vote:
            votes = np.zeros((x.shape[0], model.n_classes), dtype=np.float64)
            for tree in model.trees:
                picks = np.argmax(tree.predict_batch(x), axis=1)
                votes[np.arange(x.shape[0]), picks] += 1.0
            return votes / len(model.trees)
        total = np.zeros((x.shape[0], model.n_classes), dtype=np.float64)
        for tree in model.trees:
            total += tree.predict_batch(x)
        return total / len(model.trees)
    scores = np.tile(model.base_scores, (x.shape[0], 1))
    for flat_index, tree in enumerate(model.trees):
        k = flat_index % model.n_classes
        scores[:, k] += model.config.learning_rate * tree.predict_batch(x)
    return _softmax(scores)


def predict_batch(model: EnsembleModel, x: np.ndarray) -> np.ndarray:
    """Predicted class ids; score ties resolve to the lowest class id."""
    return np.argmax(predict_scores(model, x), axis=1).astype(np.int64)


def predict(model: EnsembleModel, row) -> int:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise DimensionMismatchError("predict takes a single 1-D row")
    return int(predict_batch(model, row[None, :])[0])


def feature_importance(model: EnsembleModel, mode: str = "impurity") -> np.ndarray:
    """Per-feature importance vector aligned with model.feature_names.

    mode "impurity": mean over trees of the sample-weighted impurity
    decreases accumulated at each tree's splits.  mode "gain": total
    objective gain per feature over all trees, normalised to sum to 1
    (all-zero when no tree ever split).
    """
    if mode not in ("impurity", "gain"):
        raise ValueError(f"unknown importance mode {mode!r}")
    n_features = len(model.feature_names)
    total = np.zeros(n_features, dtype=np.float64)
    for tree in model.trees:
        total += tree_importance_contributions(tree, mode=mode)
    if mode == "impurity":
        return total / len(model.trees)
    norm = total.sum()
    return total / norm if norm > 0 else total


def rank_features(model: EnsembleModel, mode: str = "impurity") -> list[tuple[str, float]]:
    """(symbol, importance) pairs sorted by importance descending; equal
    importances keep schema order."""
    values = feature_importance(model, mode=mode)
    order = np.argsort(-values, kind="stable")
    return [(model.feature_names[i], float(values[i])) for i in order]


def evaluate(model: EnsembleModel, data: Dataset) -> ClassReport:
    """Score the model on a labelled dataset with matching schema."""
    model.check_schema(data.symbols)
    predicted = predict_batch(model, data.values)
    if model.n_classes == len(FAULT_CLASSES):
        names = tuple(fc.name for fc in FAULT_CLASSES)
    else:
        names = tuple(f"class_{k}" for k in range(model.n_classes))
    return build_report(data.labels, predicted, names)


def model_to_dict(model: EnsembleModel) -> dict:
    cfg = model.config
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "method": cfg.method,
        "n_trees": cfg.n_trees,
        "bootstrap": cfg.bootstrap,
        "learning_rate": cfg.learning_rate,
        "hard_vote": cfg.hard_vote,
        "tree_config": tree_to_dict(model.trees[0])["config"],
        "n_classes": model.n_classes,
        "feature_names": list(model.feature_names),
        "fingerprint": model.fingerprint,
        "master_seed": model.master_seed,
        "base_scores": None
        if model.base_scores is None
        else [float(v) for v in model.base_scores],
        "trees": [tree_to_dict(tree) for tree in model.trees],
    }


def model_from_dict(payload: dict) -> EnsembleModel:
    try:
        version = payload["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}")
        trees = [tree_from_dict(item) for item in payload["trees"]]
        cfg = EnsembleConfig(
            method=payload["method"],
            n_trees=payload["n_trees"],
            tree=trees[0].config,
            bootstrap=payload["bootstrap"],
            learning_rate=payload["learning_rate"],
            hard_vote=payload["hard_vote"],
        )
        base = payload["base_scores"]
        return EnsembleModel(
            config=cfg,
            trees=trees,
            n_classes=payload["n_classes"],
            feature_names=tuple(payload["feature_names"]),
            base_scores=None if base is None else np.asarray(base, dtype=np.float64),
            master_seed=payload["master_seed"],
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"malformed model payload: {exc!r}") from exc


def save_model(model: EnsembleModel, path) -> None:
    write_json(path, model_to_dict(model))


def load_model(path) -> EnsembleModel:
    import json

    with open(path, "r", encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(payload)


def model_json_text(model: EnsembleModel) -> str:
    return canonical_json(model_to_dict(model))
