"""Ensemble learners and model selection on top of the CART primitive.

Forests use seeded bootstrap plus per-split feature subsampling with one
derived seed per tree, so results do not depend on scheduling. Gradient
boosting fits squared-loss residuals for regression and one tree per class
per stage on softmax gradients for classification (leaf values replaced by
the standard multiclass Newton step). Hyperparameters come from exhaustive
grid search with 5-fold cross-validation selecting on mean validation QWK.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .metrics import mse, qwk, round_to_grade
from .trees import Tree, TreeParams, fit_tree

_EPS = 1e-12


@dataclass
class TreeEnsembleModel:
    kind: str                      # single_tree | forest | gbt_regressor | gbt_classifier
    task: str                      # regression | classification
    trees: list[Tree]
    base_score: float | np.ndarray
    learning_rate: float
    feature_names: list[str]
    n_classes: int | None = None
    train_loss: list[float] = field(default_factory=list)

    def tree_scale(self) -> float:
        """Weight applied to each tree's output in the ensemble sum."""
        if self.kind == "forest":
            return 1.0 / len(self.trees)
        if self.kind in ("gbt_regressor", "gbt_classifier"):
            return self.learning_rate
        return 1.0

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Raw per-class scores (classification) or values (regression)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.kind == "single_tree":
            return self.trees[0].predict(X)
        if self.kind == "forest":
            acc = self.trees[0].predict(X).astype(np.float64)
            for tree in self.trees[1:]:
                acc += tree.predict(X)
            return acc / len(self.trees)
        if self.kind == "gbt_regressor":
            acc = np.full(X.shape[0], float(self.base_score))
            for tree in self.trees:
                acc += self.learning_rate * tree.predict(X)
            return acc
        # gbt_classifier: trees stored stage-major, one per class per stage
        K = self.n_classes
        logits = np.tile(np.asarray(self.base_score, dtype=np.float64), (X.shape[0], 1))
        for i, tree in enumerate(self.trees):
            logits[:, i % K] += self.learning_rate * tree.predict(X)
        return logits

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("probabilities are only defined for classifiers")
        scores = self.decision_scores(X)
        if self.kind == "gbt_classifier":
            scores = scores - scores.max(axis=1, keepdims=True)
            expd = np.exp(scores)
            return expd / expd.sum(axis=1, keepdims=True)
        total = scores.sum(axis=1, keepdims=True)
        return scores / np.where(total > 0, total, 1.0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Regression value, or argmax class label for classifiers."""
        if self.task == "regression":
            return self.decision_scores(X)
        return np.argmax(self.decision_scores(X), axis=1).astype(np.float64)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        """Scalar output for PDP curves: the value itself for regression,
        the probability-weighted expected ordinal for classifiers."""
        if self.task == "regression":
            return self.decision_scores(X)
        proba = self.predict_proba(X)
        return proba @ np.arange(proba.shape[1], dtype=np.float64)

    def to_json(self) -> dict:
        base = self.base_score
        if isinstance(base, np.ndarray):
            base = base.tolist()
        return {"family": "tree_ensemble", "kind": self.kind, "task": self.task,
                "base_score": base, "learning_rate": self.learning_rate,
                "feature_names": list(self.feature_names),
                "n_classes": self.n_classes,
                "train_loss": [float(v) for v in self.train_loss],
                "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, payload: dict) -> "TreeEnsembleModel":
        base = payload["base_score"]
        if isinstance(base, list):
            base = np.asarray(base, dtype=np.float64)
        return cls(kind=payload["kind"], task=payload["task"],
                   trees=[Tree.from_json(t) for t in payload["trees"]],
                   base_score=base, learning_rate=payload["learning_rate"],
                   feature_names=list(payload["feature_names"]),
                   n_classes=payload.get("n_classes"),
                   train_loss=list(payload.get("train_loss", [])))


def _as_arrays(X, y, weights):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if weights is None:
        weights = np.ones(y.shape[0], dtype=np.float64)
    else:
        weights = np.asarray(weights, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite training data")
    return X, y, weights


def fit_single_tree(X, y, weights=None, params: TreeParams | None = None,
                    task: str = "regression", n_classes: int | None = None,
                    feature_names: list[str] | None = None,
                    seed: int = 0) -> TreeEnsembleModel:
    X, y, weights = _as_arrays(X, y, weights)
    rng = np.random.default_rng(seed)
    tree = fit_tree(X, y, weights, params, task=task, n_classes=n_classes, rng=rng)
    return TreeEnsembleModel(
        kind="single_tree", task=task, trees=[tree], base_score=0.0,
        learning_rate=1.0,
        feature_names=feature_names or [f"f{i}" for i in range(X.shape[1])],
        n_classes=n_classes if task == "classification" else None)


def fit_forest(X, y, weights=None, n_trees: int = 100,
               mtry: int | None = None, bootstrap: bool = True, seed: int = 0,
               params: TreeParams | None = None, task: str = "regression",
               n_classes: int | None = None,
               feature_names: list[str] | None = None,
               threads: int = 1) -> TreeEnsembleModel:
    """Random forest with one derived seed per tree (scheduling-independent)."""
    X, y, weights = _as_arrays(X, y, weights)
    if n_trees < 1:
        raise ValueError("need at least one tree")
    params = params or TreeParams()
    if task == "classification" and n_classes is None:
        n_classes = int(y.max()) + 1
    if mtry is None:
        p = X.shape[1]
        mtry = max(1, int(np.sqrt(p)) if task == "classification" else max(1, p // 3))
    tree_params = TreeParams(max_depth=params.max_depth,
                             min_samples_leaf=params.min_samples_leaf,
                             min_samples_split=params.min_samples_split,
                             mtry=mtry)
    seeds = np.random.SeedSequence(seed).spawn(n_trees)

    def one_tree(seq):
        rng = np.random.default_rng(seq)
        w = weights
        if bootstrap:
            counts = np.bincount(rng.integers(0, y.size, y.size), minlength=y.size)
            w = weights * counts
            keep = w > 0
            rng_split = np.random.default_rng(seq.spawn(1)[0])
            return fit_tree(X[keep], y[keep], w[keep], tree_params, task=task,
                            n_classes=n_classes, rng=rng_split)
        return fit_tree(X, y, w, tree_params, task=task, n_classes=n_classes, rng=rng)

    trees = _run_tasks(one_tree, seeds, threads)
    return TreeEnsembleModel(
        kind="forest", task=task, trees=trees, base_score=0.0, learning_rate=1.0,
        feature_names=feature_names or [f"f{i}" for i in range(X.shape[1])],
        n_classes=n_classes if task == "classification" else None)


def _run_tasks(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fit_gbt(X, y, weights=None, n_stages: int = 100, learning_rate: float = 0.1,
            params: TreeParams | None = None, task: str = "regression",
            n_classes: int | None = None, seed: int = 0, init: str = "mean",
            feature_names: list[str] | None = None) -> TreeEnsembleModel:
    """Gradient-boosted trees; training loss is recorded per stage.

    For regression each stage fits the current residuals, so the weighted
    training MSE is non-increasing. ``init="zero"`` starts from a zero base
    score instead of the weighted mean.
    """
    X, y, weights = _as_arrays(X, y, weights)
    if n_stages < 1 or not (0.0 < learning_rate <= 1.0):
        raise ValueError("need n_stages >= 1 and learning_rate in (0, 1]")
    params = params or TreeParams(max_depth=3)
    names = feature_names or [f"f{i}" for i in range(X.shape[1])]
    wsum = weights.sum()
    rng = np.random.default_rng(seed)

    if task == "regression":
        base = float((weights * y).sum() / wsum) if init == "mean" else 0.0
        current = np.full(y.size, base)
        trees: list[Tree] = []
        losses = [float((weights * (y - current) ** 2).sum() / wsum)]
        for _ in range(n_stages):
            residual = y - current
            tree = fit_tree(X, residual, weights, params, task="regression", rng=rng)
            current = current + learning_rate * tree.predict(X)
            trees.append(tree)
            losses.append(float((weights * (y - current) ** 2).sum() / wsum))
        return TreeEnsembleModel(kind="gbt_regressor", task="regression",
                                 trees=trees, base_score=base,
                                 learning_rate=learning_rate,
                                 feature_names=names, train_loss=losses)

    if n_classes is None:
        n_classes = int(y.max()) + 1
    K = n_classes
    labels = y.astype(np.int64)
    onehot = np.zeros((y.size, K), dtype=np.float64)
    onehot[np.arange(y.size), labels] = 1.0
    priors = (weights[:, None] * onehot).sum(axis=0) / wsum
    if init == "mean":
        base = np.log(np.clip(priors, 1e-12, None))
    else:
        base = np.zeros(K, dtype=np.float64)
    logits = np.tile(base, (y.size, 1))
    trees = []
    losses = []

    def log_loss(lg):
        shifted = lg - lg.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return float(-(weights * logp[np.arange(y.size), labels]).sum() / wsum)

    losses.append(log_loss(logits))
    for _ in range(n_stages):
        shifted = logits - logits.max(axis=1, keepdims=True)
        expd = np.exp(shifted)
        proba = expd / expd.sum(axis=1, keepdims=True)
        for k in range(K):
            grad = onehot[:, k] - proba[:, k]
            tree = fit_tree(X, grad, weights, params, task="regression", rng=rng)
            _newton_relabel(tree, X, grad, weights, K)
            logits[:, k] += learning_rate * tree.predict(X)
            trees.append(tree)
        losses.append(log_loss(logits))
    return TreeEnsembleModel(kind="gbt_classifier", task="classification",
                             trees=trees, base_score=base,
                             learning_rate=learning_rate, feature_names=names,
                             n_classes=K, train_loss=losses)


def _newton_relabel(tree: Tree, X, grad, weights, n_classes):
    """Replace leaf values by the multiclass Newton step on the log-loss."""
    leaf_of = _leaf_indices(tree, X)
    factor = (n_classes - 1) / n_classes
    for leaf in np.unique(leaf_of):
        rows = leaf_of == leaf
        g = grad[rows]
        w = weights[rows]
        denom = (w * np.abs(g) * (1.0 - np.abs(g))).sum()
        tree.value[leaf] = factor * (w * g).sum() / max(denom, _EPS)


def _leaf_indices(tree: Tree, X) -> np.ndarray:
    X = np.atleast_2d(X)
    out = np.zeros(X.shape[0], dtype=np.int64)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if tree.is_leaf(node):
            out[rows] = node
            continue
        goes_left = X[rows, tree.feature[node]] <= tree.threshold[node]
        stack.append((int(tree.left[node]), rows[goes_left]))
        stack.append((int(tree.right[node]), rows[~goes_left]))
    return out


# ---------------------------------------------------------------------------
# Linear baselines


@dataclass
class LinearModel:
    coef: np.ndarray
    intercept: float
    feature_names: list[str]
    task: str = "regression"

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ self.coef + self.intercept

    predict_value = predict

    def to_json(self) -> dict:
        return {"family": "linear", "coef": self.coef.tolist(),
                "intercept": self.intercept,
                "feature_names": list(self.feature_names)}

    @classmethod
    def from_json(cls, payload: dict) -> "LinearModel":
        return cls(coef=np.asarray(payload["coef"], dtype=np.float64),
                   intercept=float(payload["intercept"]),
                   feature_names=list(payload["feature_names"]))


@dataclass
class LogisticModel:
    coef: np.ndarray          # (K, p)
    intercept: np.ndarray     # (K,)
    feature_names: list[str]
    n_classes: int = 2
    task: str = "classification"

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        logits = X @ self.coef.T + self.intercept
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        return expd / expd.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1).astype(np.float64)

    def predict_value(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return proba @ np.arange(proba.shape[1], dtype=np.float64)

    def to_json(self) -> dict:
        return {"family": "logistic", "coef": self.coef.tolist(),
                "intercept": self.intercept.tolist(),
                "feature_names": list(self.feature_names),
                "n_classes": self.n_classes}

    @classmethod
    def from_json(cls, payload: dict) -> "LogisticModel":
        return cls(coef=np.asarray(payload["coef"], dtype=np.float64),
                   intercept=np.asarray(payload["intercept"], dtype=np.float64),
                   feature_names=list(payload["feature_names"]),
                   n_classes=int(payload["n_classes"]))


def fit_linear(X, y, damping: float = 1e-8,
               feature_names: list[str] | None = None) -> LinearModel:
    """Ridge-damped least squares (handles collinear designs)."""
    X, y, _ = _as_arrays(X, y, None)
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    gram = Xb.T @ Xb + damping * np.eye(Xb.shape[1])
    beta = np.linalg.solve(gram, Xb.T @ y)
    return LinearModel(coef=beta[:-1], intercept=float(beta[-1]),
                       feature_names=feature_names or [f"f{i}" for i in range(X.shape[1])])


def fit_logistic(X, y, weights=None, max_iter: int = 10000, tol: float = 1e-6,
                 damping: float = 1e-8, n_classes: int | None = None,
                 feature_names: list[str] | None = None) -> LogisticModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Runs until the gradient norm of the weight-normalized log-loss falls
    below ``tol`` or ``max_iter`` iterations; the step size comes from the
    softmax Hessian trace bound, so descent is monotone.
    """
    X, y, weights = _as_arrays(X, y, weights)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    K = n_classes
    labels = y.astype(np.int64)
    Xb = np.hstack([X, np.ones((X.shape[0], 1))])
    wn = weights / weights.sum()
    onehot = np.zeros((y.size, K), dtype=np.float64)
    onehot[np.arange(y.size), labels] = 1.0

    beta = np.zeros((K, Xb.shape[1]), dtype=np.float64)
    lipschitz = 0.5 * float((wn[:, None] * Xb * Xb).sum()) + damping
    step = 1.0 / lipschitz
    for _ in range(max_iter):
        logits = Xb @ beta.T
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        proba = expd / expd.sum(axis=1, keepdims=True)
        grad = (proba - onehot).T @ (wn[:, None] * Xb) + damping * beta
        if np.sqrt((grad * grad).sum()) < tol:
            break
        beta -= step * grad
    return LogisticModel(coef=beta[:, :-1], intercept=beta[:, -1],
                         feature_names=feature_names or [f"f{i}" for i in range(X.shape[1])],
                         n_classes=K)


# ---------------------------------------------------------------------------
# Class weights, grid search, length baseline


def class_weights(y) -> np.ndarray:
    """weight(sample of class k) = n / (K * n_k); the weights sum to n."""
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("empty label vector")
    classes, counts = np.unique(y, return_counts=True)
    lookup = {c: y.size / (classes.size * n) for c, n in zip(classes, counts)}
    return np.asarray([lookup[v] for v in y], dtype=np.float64)


@dataclass
class GridSearchSpec:
    grid: dict[str, list]
    folds: int = 5
    seed: int = 0
    selection_metric: str = "qwk"

    def __post_init__(self):
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("empty parameter grid")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    def points(self) -> list[dict]:
        names = list(self.grid)
        points = [{}]
        for name in names:
            points = [dict(p, **{name: v}) for p in points for v in self.grid[name]]
        return points


def _cv_folds(y, folds, seed, stratified):
    rng = np.random.default_rng(seed)
    n = y.size
    assignment = np.empty(n, dtype=np.int64)
    if stratified:
        for cls in np.unique(y):
            rows = np.flatnonzero(y == cls)
            rng.shuffle(rows)
            assignment[rows] = np.arange(rows.size) % folds
    else:
        order = rng.permutation(n)
        assignment[order] = np.arange(n) % folds
    return assignment


def make_estimator(model_kind: str, params: dict, task: str,
                   n_classes: int | None, seed: int,
                   feature_names: list[str] | None = None, threads: int = 1):
    """Train one model of the named family with the given parameters."""
    def fit(X, y, weights=None):
        tree_params = TreeParams(
            max_depth=int(params.get("max_depth", 6)),
            min_samples_leaf=int(params.get("min_samples_leaf", 1)),
            min_samples_split=int(params.get("min_samples_split", 2)),
            mtry=params.get("mtry"))
        if model_kind == "decision_tree":
            return fit_single_tree(X, y, weights, tree_params, task=task,
                                   n_classes=n_classes, feature_names=feature_names,
                                   seed=seed)
        if model_kind == "random_forest":
            return fit_forest(X, y, weights,
                              n_trees=int(params.get("n_trees", 100)),
                              mtry=params.get("mtry"), bootstrap=True, seed=seed,
                              params=tree_params, task=task, n_classes=n_classes,
                              feature_names=feature_names, threads=threads)
        if model_kind == "gbt":
            return fit_gbt(X, y, weights,
                           n_stages=int(params.get("n_stages", 100)),
                           learning_rate=float(params.get("learning_rate", 0.1)),
                           params=tree_params, task=task, n_classes=n_classes,
                           seed=seed, feature_names=feature_names)
        if model_kind == "linear":
            return fit_linear(X, y, feature_names=feature_names)
        if model_kind == "logistic":
            return fit_logistic(X, y, weights, n_classes=n_classes,
                                feature_names=feature_names)
        raise ValueError(f"unknown model kind {model_kind!r}")
    return fit


def grid_search(model_kind: str, spec: GridSearchSpec, X, y,
                task: str = "regression", n_classes: int | None = None,
                weights=None, feature_names: list[str] | None = None,
                threads: int = 1) -> tuple[dict, list[dict]]:
    """Exhaustive search; best point = highest mean validation QWK, ties
    broken by lower mean MSE then first-in-grid order. Returns the winning
    parameters and the full CV table."""
    X = np.asarray(X, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if n_classes is None:
        n_classes = int(y_arr.max()) + 1
    folds = _cv_folds(y_arr.astype(np.int64), spec.folds, spec.seed,
                      stratified=(task == "classification"))

    def evaluate(point):
        fold_qwk, fold_mse, flagged = [], [], False
        for fold in range(spec.folds):
            hold = folds == fold
            if hold.all() or (~hold).all():
                flagged = True
                continue
            w_tr = weights if weights is None else np.asarray(weights)[~hold]
            fitter = make_estimator(model_kind, point, task, n_classes,
                                    seed=spec.seed + fold, threads=1)
            model = fitter(X[~hold], y_arr[~hold], w_tr)
            pred = model.predict(X[hold])
            truth = y_arr[hold].astype(np.int64)
            if set(np.unique(truth)) != set(range(n_classes)):
                flagged = True
            grades = pred.astype(np.int64) if task == "classification" \
                else round_to_grade(pred, n_classes)
            fold_qwk.append(qwk(truth, grades, n_classes))
            fold_mse.append(mse(truth, pred))
        return {"params": point,
                "mean_qwk": float(np.mean(fold_qwk)) if fold_qwk else float("-inf"),
                "mean_mse": float(np.mean(fold_mse)) if fold_mse else float("inf"),
                "fold_qwk": fold_qwk, "fold_mse": fold_mse,
                "flagged": flagged}

    table = _run_tasks(evaluate, spec.points(), threads)
    best_idx = 0
    for i, row in enumerate(table[1:], start=1):
        cur = table[best_idx]
        if (row["mean_qwk"], -row["mean_mse"]) > (cur["mean_qwk"], -cur["mean_mse"]):
            best_idx = i
    return dict(table[best_idx]["params"]), table


def length_only_baseline(lengths, y, task: str = "regression",
                         n_classes: int | None = None, seed: int = 0,
                         weights=None, n_trees: int = 100) -> TreeEnsembleModel:
    """Random forest over the single word-count feature W."""
    X = np.asarray(lengths, dtype=np.float64).reshape(-1, 1)
    return fit_forest(X, y, weights, n_trees=n_trees, mtry=1, bootstrap=True,
                      seed=seed, params=TreeParams(max_depth=6), task=task,
                      n_classes=n_classes, feature_names=["W"])


# ---------------------------------------------------------------------------
# Serialization shared by every model family


_FAMILIES = {"tree_ensemble": TreeEnsembleModel, "linear": LinearModel,
             "logistic": LogisticModel}


def model_from_json(payload: dict):
    family = payload.get("family")
    if family not in _FAMILIES:
        raise ValueError(f"unknown model family {family!r}")
    return _FAMILIES[family].from_json(payload)


def save_model(model, path: str | Path, extra: dict | None = None) -> None:
    payload = model.to_json()
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path, with_payload: bool = False):
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model = model_from_json(payload)
    return (model, payload) if with_payload else model
