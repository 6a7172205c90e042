"""The five classifiers behind one train/score interface.

Scores are continuous values in [0, 1] where larger means "more likely
covid"; the evaluation code only relies on their ordering.

* ``LR``  -- L2-regularised logistic regression fitted by full-batch
  gradient descent.
* ``KNN`` -- k nearest neighbours (Euclidean, standardised features).
* ``RF``  -- bagged CART trees with Gini splits and per-node feature
  subsampling.
* ``SVM`` -- linear soft-margin SVM fitted by full-batch subgradient descent
  on the hinge loss; the score is the sigmoid of the margin.
* ``ADA`` -- discrete AdaBoost whose weak learner is a small random forest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, SchemaError
from .vectorizer import LAYOUT_VERSION

MODEL_KINDS = ("ADA", "KNN", "LR", "RF", "SVM")

DEFAULT_HYPERPARAMS = {
    "LR": {"C": 1.0, "tol": 1e-6, "max_iter": 5000},
    "KNN": {"k": 5},
    "RF": {"n_trees": 100, "max_depth": 16, "min_samples_split": 2},
    "SVM": {"C": 1.0, "max_iter": 1000},
    "ADA": {"rounds": 50, "base_trees": 10, "base_depth": 3},
}


def normalise_kind(kind):
    k = str(kind).upper()
    if k not in MODEL_KINDS:
        raise SchemaError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    return k


def _as_binary(labels):
    arr = np.asarray(labels)
    if arr.dtype.kind in "US":
        return (arr == "covid").astype(int)
    return arr.astype(int)


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# standardisation


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, rows):
        rows = np.asarray(rows, dtype=np.float64)
        mean = rows.mean(axis=0)
        std = rows.std(axis=0)
        constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        # zero-variance columns pass through untouched
        return cls(np.where(constant, 0.0, mean), np.where(constant, 1.0, std))

    def apply(self, rows):
        return (np.asarray(rows, dtype=np.float64) - self.mean) / self.scale


def standardize_fit_apply(train_rows, other_rows=None):
    """Fit z-scoring on ``train_rows`` and apply it to both sets."""
    st = Standardizer.fit(train_rows)
    other = None if other_rows is None else st.apply(other_rows)
    return st, st.apply(train_rows), other


# ---------------------------------------------------------------------------
# CART


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # weighted share of class 1 at each node

    def predict(self, X):
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            inner = self.left[node] >= 0
            if not inner.any():
                return self.value[node]
            r, n = rows[inner], node[inner]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[inner] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["feature"], dtype=np.intp), np.array(d["threshold"], dtype=np.float64),
                   np.array(d["left"], dtype=np.intp), np.array(d["right"], dtype=np.intp),
                   np.array(d["value"], dtype=np.float64))


def _best_split(X, y, w, feats):
    xs = X[:, feats]
    order = np.argsort(xs, axis=0, kind="stable")
    vals = np.take_along_axis(xs, order, axis=0)
    ws = w[order]
    cw = np.cumsum(ws, axis=0)[:-1]
    cp = np.cumsum(ws * y[order], axis=0)[:-1]
    total_w, total_p = w.sum(), (w * y).sum()
    rw, rp = total_w - cw, total_p - cp
    with np.errstate(divide="ignore", invalid="ignore"):
        impurity = cp * (cw - cp) / cw + rp * (rw - rp) / rw
    valid = (vals[1:] > vals[:-1]) & (cw > 0) & (rw > 0)
    if not valid.any():
        return None
    impurity = np.where(valid, impurity, np.inf)
    flat = int(np.argmin(impurity))
    i, j = divmod(flat, len(feats))
    parent = total_p * (total_w - total_p) / total_w
    if not impurity[i, j] < parent - 1e-12 * total_w:
        return None
    return feats[j], 0.5 * (vals[i, j] + vals[i + 1, j])


def fit_tree(X, y, w, rng, max_features, max_depth, min_samples_split=2):
    """Grow one weighted Gini tree; rows with zero weight must be filtered out first."""
    feature, threshold, left, right, value = [], [], [], [], []
    d = X.shape[1]
    stack = [(np.arange(X.shape[0]), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        node = len(value)
        if parent >= 0:
            (right if is_right else left)[parent] = node
        wn, yn = w[idx], y[idx]
        total = wn.sum()
        p = float((wn * yn).sum() / total) if total > 0 else 0.5
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(p)
        if depth >= max_depth or idx.size < min_samples_split or p in (0.0, 1.0):
            continue
        feats = rng.choice(d, size=min(max_features, d), replace=False)
        split = _best_split(X[idx], yn, wn, feats)
        if split is None:
            continue
        f, t = split
        feature[node], threshold[node] = int(f), float(t)
        mask = X[idx, f] <= t
        stack.append((idx[~mask], depth + 1, node, True))
        stack.append((idx[mask], depth + 1, node, False))
    return Tree(np.array(feature, dtype=np.intp), np.array(threshold), np.array(left, dtype=np.intp),
                np.array(right, dtype=np.intp), np.array(value))


def fit_forest(X, y, n_trees, max_depth, seed, sample_weight=None, max_features=None, min_samples_split=2):
    n, d = X.shape
    max_features = max_features or int(math.ceil(math.sqrt(d)))
    base_w = np.full(n, 1.0 / n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    trees = []
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    for child in root.spawn(n_trees):
        rng = np.random.default_rng(child)
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        w = counts * base_w
        keep = np.flatnonzero(w > 0)
        trees.append(fit_tree(X[keep], y[keep], w[keep], rng, max_features, max_depth, min_samples_split))
    return trees


def forest_score(trees, X):
    return np.mean([t.predict(X) for t in trees], axis=0)


# ---------------------------------------------------------------------------
# linear models


def _fit_logistic(X, y, C, tol, max_iter):
    n, d = X.shape
    lam = 1.0 / (C * n)
    Xb = np.hstack([X, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(Xb, 2) ** 2 / n + lam
    step = 1.0 / lipschitz
    theta = np.zeros(d + 1)
    reg = np.r_[np.full(d, lam), 0.0]
    for it in range(max_iter):
        grad = Xb.T @ (_sigmoid(Xb @ theta) - y) / n + reg * theta
        if np.max(np.abs(grad)) < tol:
            break
        theta -= step * grad
    return theta[:-1], float(theta[-1]), it + 1


def _fit_linear_svm(X, y, C, max_iter):
    # Full-batch Pegasos: step 1/(lam t), projection onto the ball of radius
    # 1/sqrt(lam), suffix-averaged iterate.  The bias rides as a constant
    # feature so it shares the step schedule.
    n, d = X.shape
    lam = 1.0 / (C * n)
    Xb = np.hstack([X, np.ones((n, 1))])
    s = 2.0 * y - 1.0
    theta = np.zeros(d + 1)
    avg = np.zeros(d + 1)
    start = max_iter // 2
    radius = 1.0 / math.sqrt(lam)
    for t in range(1, max_iter + 1):
        active = s * (Xb @ theta) < 1.0
        grad = lam * theta - (s[active, None] * Xb[active]).sum(axis=0) / n
        theta = theta - grad / (lam * t)
        norm = np.linalg.norm(theta)
        if norm > radius:
            theta *= radius / norm
        if t > start:
            avg += theta
    avg /= max_iter - start
    return avg[:-1], float(avg[-1])


# ---------------------------------------------------------------------------
# public interface


@dataclass
class TrainedModel:
    kind: str
    params: dict
    standardizer: Standardizer
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0
    layout_version: int = LAYOUT_VERSION

    @property
    def n_features(self):
        return self.standardizer.mean.shape[0]

    def to_json(self):
        params = {}
        for key, val in self.params.items():
            if key in ("trees",):
                params[key] = [t.to_dict() for t in val]
            elif key == "rounds":
                params[key] = [{"alpha": a, "trees": [t.to_dict() for t in ts]} for a, ts in val]
            elif isinstance(val, np.ndarray):
                params[key] = val.tolist()
            else:
                params[key] = val
        return json.dumps({
            "format": "respire-model",
            "version": 1,
            "kind": self.kind,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
            "layout_version": self.layout_version,
            "standardizer": {"mean": self.standardizer.mean.tolist(), "scale": self.standardizer.scale.tolist()},
            "params": params,
        })

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != "respire-model" or doc.get("version") != 1:
            raise SchemaError("not a version-1 respire model document")
        raw = doc["params"]
        params = {}
        for key, val in raw.items():
            if key == "trees":
                params[key] = [Tree.from_dict(t) for t in val]
            elif key == "rounds":
                params[key] = [(r["alpha"], [Tree.from_dict(t) for t in r["trees"]]) for r in val]
            elif isinstance(val, list):
                params[key] = np.array(val, dtype=np.float64)
            else:
                params[key] = val
        st = Standardizer(np.array(doc["standardizer"]["mean"]), np.array(doc["standardizer"]["scale"]))
        return cls(doc["kind"], params, st, doc["hyperparams"], doc["seed"], doc["layout_version"])


def train(kind, rows, labels, hyperparams=None, seed=0):
    """Fit one classifier on training rows.

    ``labels`` may be ``"covid"``/``"healthy"`` strings or 1/0 integers.  Both
    classes need at least two samples.
    """
    kind = normalise_kind(kind)
    hp = dict(DEFAULT_HYPERPARAMS[kind])
    hp.update(hyperparams or {})
    rows = np.asarray(rows, dtype=np.float64)
    y = _as_binary(labels)
    counts = np.bincount(y, minlength=2)
    if counts.size != 2 or counts.min() < 2:
        raise DegenerateLabelsError(f"need >= 2 samples of each class, got {counts.tolist()}")
    st = Standardizer.fit(rows)
    X = st.apply(rows)

    if kind == "LR":
        w, b, n_iter = _fit_logistic(X, y, hp["C"], hp["tol"], int(hp["max_iter"]))
        params = {"coef": w, "intercept": b, "n_iter": n_iter}
    elif kind == "SVM":
        w, b = _fit_linear_svm(X, y, hp["C"], int(hp["max_iter"]))
        params = {"coef": w, "intercept": b}
    elif kind == "KNN":
        params = {"X": X, "y": y.astype(np.float64)}
    elif kind == "RF":
        params = {"trees": fit_forest(X, y, int(hp["n_trees"]), int(hp["max_depth"]), seed,
                                      min_samples_split=int(hp["min_samples_split"]))}
    else:
        params = {"rounds": _fit_adaboost(X, y, hp, seed)}
    return TrainedModel(kind, params, st, hp, seed)


def _fit_adaboost(X, y, hp, seed):
    n = X.shape[0]
    w = np.full(n, 1.0 / n)
    rounds = []
    for child in np.random.SeedSequence(seed).spawn(int(hp["rounds"])):
        trees = fit_forest(X, y, int(hp["base_trees"]), int(hp["base_depth"]), child, sample_weight=w)
        miss = (forest_score(trees, X) >= 0.5).astype(int) != y
        err = float(w[miss].sum() / w.sum())
        if err >= 0.5:
            if not rounds:
                rounds.append((1.0, trees))
            break
        err = max(err, 1e-10)
        alpha = 0.5 * math.log((1.0 - err) / err)
        rounds.append((alpha, trees))
        if err <= 1e-10:
            break
        w = w * np.exp(np.where(miss, alpha, -alpha))
        w /= w.sum()
    return rounds


def score(model, rows):
    """Scores in [0, 1] for one row or a matrix of rows."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    if single:
        rows = rows[None, :]
    if rows.shape[1] != model.n_features:
        raise SchemaError(f"model expects {model.n_features} features, got {rows.shape[1]}")
    X = model.standardizer.apply(rows)
    p = model.params
    if model.kind in ("LR", "SVM"):
        out = _sigmoid(X @ p["coef"] + p["intercept"])
    elif model.kind == "KNN":
        out = _knn_score(p["X"], p["y"], X, int(model.hyperparams["k"]))
    elif model.kind == "RF":
        out = forest_score(p["trees"], X)
    else:
        alphas = np.array([a for a, _ in p["rounds"]])
        votes = np.array([forest_score(ts, X) for _, ts in p["rounds"]])
        out = alphas @ votes / alphas.sum()
    return float(out[0]) if single else out


def decision_function(model, rows):
    """Raw margin for the linear models (LR logit, SVM margin)."""
    if model.kind not in ("LR", "SVM"):
        raise SchemaError(f"{model.kind} has no linear margin")
    X = model.standardizer.apply(np.atleast_2d(rows))
    return X @ model.params["coef"] + model.params["intercept"]


def _knn_score(train_X, train_y, X, k):
    k = min(k, train_X.shape[0])
    d2 = (X * X).sum(axis=1)[:, None] + (train_X * train_X).sum(axis=1)[None, :] - 2.0 * X @ train_X.T
    nearest = np.argsort(np.maximum(d2, 0.0), axis=1, kind="stable")[:, :k]
    return train_y[nearest].mean(axis=1)
