"""Cross-validated evaluation, feature-subset ranking and fold-level ANOVA."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import betainc

from . import models
from .errors import DegenerateVarianceError, FoldError, MetricError, SchemaError

# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldAssignment:
    fold: np.ndarray  # fold index per sample
    n_folds: int

    def test_mask(self, k):
        return self.fold == k

    def split(self, k):
        mask = self.fold == k
        return np.flatnonzero(~mask), np.flatnonzero(mask)


def stratified_folds(labels, groups=None, n_folds=5, seed=0):
    """Assign samples to folds, keeping each group in one fold.

    Groups of each class are shuffled, then placed largest first into the
    fold currently holding the fewest samples of that class (ties go to the
    fold with fewest samples overall, then the lowest index).  With one
    sample per group this deals every class round-robin, so fold class
    counts differ by at most one.
    """
    y = models._as_binary(labels)
    n = y.shape[0]
    groups = np.arange(n) if groups is None else np.asarray(groups)
    if groups.shape[0] != n:
        raise FoldError("labels and groups differ in length")
    if n_folds < 2:
        raise FoldError("need at least 2 folds")
    uniq, inverse = np.unique(groups, return_inverse=True)
    members = [np.flatnonzero(inverse == g) for g in range(uniq.size)]
    group_label = np.empty(uniq.size, dtype=int)
    for g, idx in enumerate(members):
        labs = np.unique(y[idx])
        if labs.size != 1:
            raise FoldError(f"group {uniq[g]!r} mixes labels")
        group_label[g] = labs[0]

    rng = np.random.default_rng(seed)
    fold = np.full(n, -1)
    totals = np.zeros(n_folds, dtype=int)
    for cls in (1, 0):
        gids = np.flatnonzero(group_label == cls)
        if gids.size < n_folds:
            raise FoldError(f"class {cls} has {gids.size} groups, fewer than {n_folds} folds")
        gids = rng.permutation(gids)
        sizes = np.array([members[g].size for g in gids])
        gids = gids[np.argsort(-sizes, kind="stable")]
        per_class = np.zeros(n_folds, dtype=int)
        for g in gids:
            k = min(range(n_folds), key=lambda f: (per_class[f], totals[f], f))
            fold[members[g]] = k
            per_class[k] += members[g].size
            totals[k] += members[g].size
    return FoldAssignment(fold, n_folds)


# ---------------------------------------------------------------------------
# curves and metrics


def _ranked_counts(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = models._as_binary(labels)
    if s.shape[0] != y.shape[0]:
        raise MetricError("scores and labels differ in length")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.shape[0] - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    return s[last], tps, fps


class Curve(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray


def roc_auc(scores, labels):
    """ROC curve over every distinct threshold and its trapezoidal area.

    Tied scores form one step, which makes the area equal to the
    Mann-Whitney probability with ties counted as one half.  The area is
    accumulated in integer counts before the final division.
    """
    thresholds, tps, fps = _ranked_counts(scores, labels)
    pos, neg = int(tps[-1]), int(fps[-1])
    if pos == 0 or neg == 0:
        raise MetricError("ROC needs both classes present")
    tp = np.r_[0, tps].astype(np.int64)
    fp = np.r_[0, fps].astype(np.int64)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    curve = Curve(fp / neg, tp / pos, np.r_[np.inf, thresholds])
    return curve, twice_area / (2.0 * pos * neg)


def pr_ap(scores, labels):
    """Precision-recall curve and step-integrated average precision.

    ``AP = sum_i (R_i - R_{i-1}) * P_i`` over descending distinct
    thresholds, without interpolation.
    """
    thresholds, tps, fps = _ranked_counts(scores, labels)
    pos = int(tps[-1])
    if pos == 0:
        raise MetricError("average precision needs at least one positive")
    precision = tps / (tps + fps)
    recall = tps / pos
    ap = float(np.sum(np.diff(np.r_[0, tps]) * precision) / pos)
    return Curve(recall, precision, thresholds), ap


class OperatingPoint(NamedTuple):
    precision: float
    recall: float
    precision_defined: bool


def precision_recall_at(scores, labels, threshold=0.5):
    """Precision and recall when scores ``>= threshold`` are called positive.

    With no predicted positives precision is reported as 0 and flagged as
    undefined.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = models._as_binary(labels).astype(bool)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    called = int(pred.sum())
    pos = int(y.sum())
    recall = tp / pos if pos else 0.0
    if called == 0:
        return OperatingPoint(0.0, recall, False)
    return OperatingPoint(tp / called, recall, True)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass
class FoldResult:
    roc_auc: float
    ap: float
    precision: float
    recall: float
    precision_defined: bool
    roc: Curve
    pr: Curve
    base_rate: float


@dataclass
class CvResult:
    model: str
    subset: str
    sample_type: str
    folds: list = field(default_factory=list)

    def values(self, metric):
        return np.array([getattr(f, metric) for f in self.folds])

    def mean(self, metric="roc_auc"):
        return float(self.values(metric).mean())

    def std(self, metric="roc_auc"):
        return float(self.values(metric).std())

    def summary(self):
        return {m: {"mean": self.mean(m), "std": self.std(m), "folds": self.values(m).tolist()}
                for m in ("roc_auc", "ap", "precision", "recall")}

    def to_dict(self, curves=False):
        d = {"model": self.model, "subset": self.subset, "sample_type": self.sample_type,
             "n_folds": len(self.folds), "metrics": self.summary()}
        if curves:
            d["curves"] = [{"fpr": f.roc.x.tolist(), "tpr": f.roc.y.tolist(),
                            "recall": f.pr.x.tolist(), "precision": f.pr.y.tolist()} for f in self.folds]
        return d


def fold_seed(seed, k):
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0])


def cross_validate(dataset, model_kind, feature_subset="all", n_folds=5, seed=0,
                   hyperparams=None, threshold=0.5, folds=None):
    """Train and score one model on one feature subset across grouped folds."""
    kind = models.normalise_kind(model_kind)
    X = dataset.subset(feature_subset)
    if X.shape[1] == 0:
        raise SchemaError(f"subset {feature_subset!r} selects no columns")
    y = dataset.y
    folds = folds or stratified_folds(y, dataset.participant_ids, n_folds, seed)
    result = CvResult(kind, feature_subset, dataset.sample_type)
    for k in range(folds.n_folds):
        train_idx, test_idx = folds.split(k)
        model = models.train(kind, X[train_idx], y[train_idx], hyperparams, fold_seed(seed, k))
        s = models.score(model, X[test_idx])
        roc, auc = roc_auc(s, y[test_idx])
        pr, ap = pr_ap(s, y[test_idx])
        op = precision_recall_at(s, y[test_idx], threshold)
        result.folds.append(FoldResult(auc, ap, op.precision, op.recall, op.precision_defined,
                                       roc, pr, float(y[test_idx].mean())))
    return result


def _cv_task(args):
    dataset, kind, subset, n_folds, seed, hyperparams, threshold = args
    return cross_validate(dataset, kind, subset, n_folds, seed, hyperparams, threshold)


def worker_count(default=1):
    raw = os.environ.get("RESPIRE_WORKERS", "")
    try:
        return max(1, int(raw)) if raw else default
    except ValueError:
        return default


def run_grid(tasks, workers=None):
    """Evaluate ``(dataset, kind, subset, n_folds, seed, hyperparams, threshold)`` tasks in order."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [_cv_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cv_task, tasks))


# ---------------------------------------------------------------------------
# ranking


@dataclass
class Ranking:
    models: list
    subsets: list
    cells: dict  # (model, subset) -> CvResult
    per_model: dict  # model -> ordered subsets
    overall: list  # [(subset, cross-model mean AUC)] best first

    def mean_auc(self, model, subset):
        return self.cells[(model, subset)].mean("roc_auc")

    def position(self, subset):
        return [s for s, _ in self.overall].index(subset)


def _order(scores):
    # best first; equal scores fall back to the subset name
    return sorted(scores, key=lambda s: (-scores[s], s))


def rank_from_cells(cells, model_kinds, subsets):
    per_model = {m: _order({s: cells[(m, s)].mean() for s in subsets}) for m in model_kinds}
    overall = {s: float(np.mean([cells[(m, s)].mean() for m in model_kinds])) for s in subsets}
    return Ranking(list(model_kinds), list(subsets), cells, per_model,
                   [(s, overall[s]) for s in _order(overall)])


def rank_features(dataset, model_kinds, subsets, n_folds=5, seed=0, hyperparams=None,
                  threshold=0.5, workers=None):
    """Order feature subsets by cross-validated ROC-AUC, per model and across models."""
    kinds = [models.normalise_kind(k) for k in model_kinds]
    subsets = list(subsets)
    if not subsets:
        raise SchemaError("rank_features needs at least one subset")
    hyperparams = hyperparams or {}
    grid = [(m, s) for m in kinds for s in subsets]
    tasks = [(dataset, m, s, n_folds, seed, hyperparams.get(m), threshold) for m, s in grid]
    cells = dict(zip(grid, run_grid(tasks, workers)))
    return rank_from_cells(cells, kinds, subsets)


# ---------------------------------------------------------------------------
# repeated-measures ANOVA


class AnovaTable(NamedTuple):
    f: float
    p: float
    df_conditions: int
    df_error: int
    ss_conditions: float
    ss_subjects: float
    ss_error: float


def f_survival(f, df1, df2):
    """Upper tail ``P(F > f)`` of the F distribution via the regularised incomplete beta."""
    if f <= 0:
        return 1.0
    return float(betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))


def rm_anova_table(metric_matrix):
    """One-way repeated-measures ANOVA, subjects in rows, conditions in columns."""
    x = np.asarray(metric_matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise SchemaError(f"need at least 2 subjects x 2 conditions, got shape {x.shape}")
    s, c = x.shape
    grand = x.mean()
    col = x.mean(axis=0)
    row = x.mean(axis=1)
    ss_cond = s * float(np.sum((col - grand) ** 2))
    ss_subj = c * float(np.sum((row - grand) ** 2))
    resid = x - row[:, None] - col[None, :] + grand
    ss_err = float(np.sum(resid ** 2))
    ss_total = float(np.sum((x - grand) ** 2))
    df1, df2 = c - 1, (c - 1) * (s - 1)
    if ss_cond <= 1e-15 * max(ss_total, 1e-300):
        return AnovaTable(0.0, 1.0, df1, df2, ss_cond, ss_subj, ss_err)
    if ss_err <= 1e-12 * ss_total:
        raise DegenerateVarianceError("error variance is zero; F is unbounded")
    f = (ss_cond / df1) / (ss_err / df2)
    return AnovaTable(f, f_survival(f, df1, df2), df1, df2, ss_cond, ss_subj, ss_err)


def rm_anova(metric_matrix):
    """``(F, p)`` for a folds x conditions matrix of metric values.

    Conditions that do not differ at all give ``F = 0, p = 1``; differing
    conditions with zero residual variance raise
    :class:`DegenerateVarianceError`.
    """
    table = rm_anova_table(metric_matrix)
    return table.f, table.p
