import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from respire.errors import DegenerateVarianceError, FoldError, MetricError
from respire.evaluation import (
    cross_validate,
    f_survival,
    pr_ap,
    precision_recall_at,
    rank_features,
    rank_from_cells,
    rm_anova,
    rm_anova_table,
    roc_auc,
    run_grid,
    stratified_folds,
)
from respire.vectorizer import LabeledDataset, layout_for, subset_columns

from .oracles import brute_ap, hand_anova, pairwise_auc

# ---------------------------------------------------------------------------
# folds


def test_exact_stratification_singletons():
    y = np.repeat([1, 0], 10)
    fa = stratified_folds(y, n_folds=5, seed=3)
    for k in range(5):
        _, test = fa.split(k)
        assert y[test].sum() == 2 and (1 - y[test]).sum() == 2


def test_groups_share_a_fold():
    groups = ["a", "a", "b", "b", "c", "c", "d", "d"]
    y = [1, 1, 0, 0, 1, 1, 0, 0]
    fa = stratified_folds(y, groups, n_folds=2, seed=0)
    for g in set(groups):
        idx = [i for i, h in enumerate(groups) if h == g]
        assert len(set(fa.fold[idx])) == 1


def test_imbalanced_positive_counts():
    y = np.r_[np.ones(10, int), np.zeros(130, int)]
    for seed in range(5):
        fa = stratified_folds(y, n_folds=5, seed=seed)
        pos = np.array([y[fa.split(k)[1]].sum() for k in range(5)])
        assert np.all(np.abs(pos - pos.mean()) <= 1)


def test_too_few_groups():
    with pytest.raises(FoldError):
        stratified_folds([1, 1, 0, 0, 0, 0, 0], n_folds=3)
    with pytest.raises(FoldError):
        stratified_folds([1, 0, 1, 0], groups=["a", "a", "b", "b"], n_folds=2)


@given(st.lists(st.integers(0, 1), min_size=10, max_size=60), st.integers(2, 5), st.integers(0, 100))
def test_folds_partition_samples(labels, n_folds, seed):
    y = np.array(labels)
    groups = np.arange(len(y)) // 2 * 2 + y  # pairs of same-label rows share a group
    n_groups = [len(set(groups[y == c])) for c in (0, 1)]
    if min(n_groups) < n_folds:
        with pytest.raises(FoldError):
            stratified_folds(y, groups, n_folds, seed)
        return
    fa = stratified_folds(y, groups, n_folds, seed)
    tests = np.concatenate([fa.split(k)[1] for k in range(n_folds)])
    assert sorted(tests.tolist()) == list(range(len(y)))
    for k in range(n_folds):
        train_idx, test_idx = fa.split(k)
        assert not set(groups[train_idx]) & set(groups[test_idx])


# ---------------------------------------------------------------------------
# ROC / PR


def test_auc_examples():
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])[1] == 0.75
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])[1] == 1.0
    assert roc_auc([0.3] * 6, [0, 1, 0, 1, 1, 0])[1] == 0.5
    with pytest.raises(MetricError):
        roc_auc([0.1, 0.2], [1, 1])


def test_roc_curve_endpoints():
    curve, _ = roc_auc([0.2, 0.9, 0.4, 0.6], [0, 1, 0, 1])
    assert curve.x[0] == 0 and curve.y[0] == 0 and curve.x[-1] == 1 and curve.y[-1] == 1
    assert np.all(np.diff(curve.x) >= 0) and np.all(np.diff(curve.y) >= 0)


labelled_scores = st.integers(2, 50).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 12), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


@given(labelled_scores)
def test_auc_vs_pairwise_and_complement(data):
    raw, labels = data
    if len(set(labels)) < 2:
        return
    s = np.array(raw) / 16.0
    auc = roc_auc(s, labels)[1]
    assert abs(auc - pairwise_auc(list(s), labels)) < 1e-9
    assert auc + roc_auc(1 - s, labels)[1] == 1.0


@given(labelled_scores)
def test_monotone_transform_invariance(data):
    raw, labels = data
    if len(set(labels)) < 2:
        return
    s = np.array(raw) / 16.0
    t = np.exp(3 * s) + s ** 3
    assert roc_auc(s, labels)[1] == roc_auc(t, labels)[1]
    assert pr_ap(s, labels)[1] == pr_ap(t, labels)[1]


def test_ap_examples():
    assert pr_ap([0.9, 0.1], [1, 0])[1] == 1.0
    assert pr_ap([0.1, 0.9], [1, 0])[1] == 0.5
    with pytest.raises(MetricError):
        pr_ap([0.1, 0.9], [0, 0])


@given(labelled_scores)
def test_ap_vs_brute_force(data):
    raw, labels = data
    if sum(labels) == 0:
        return
    s = list(np.array(raw) / 16.0)
    assert pr_ap(s, labels)[1] == pytest.approx(brute_ap(s, labels), abs=1e-12)


@given(st.integers(1, 30), st.integers(1, 300))
def test_all_ties_ap_is_base_rate(pos, neg):
    labels = [1] * pos + [0] * neg
    assert abs(pr_ap(np.full(pos + neg, 0.5), labels)[1] - pos / (pos + neg)) < 1e-12


def test_random_scores_ap_near_base_rate():
    aps = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = np.r_[np.ones(70, int), np.zeros(930, int)]
        aps.append(pr_ap(rng.uniform(size=1000), y)[1])
    assert abs(np.mean(aps) - 0.07) <= 0.03


def test_precision_recall_examples():
    op = precision_recall_at([0.9, 0.8, 0.1], [1, 1, 0])
    assert (op.precision, op.recall) == (1.0, 1.0)
    op = precision_recall_at([0.9, 0.7, 0.6, 0.8], [1, 0, 0, 0])
    assert op.precision == 0.25 and op.recall == 1.0
    op = precision_recall_at([0.9, 0.4, 0.6], [1, 1, 0], 0.5)
    assert (op.precision, op.recall) == (0.5, 0.5)
    op = precision_recall_at([0.1, 0.2], [1, 0])
    assert op.precision == 0.0 and not op.precision_defined


# ---------------------------------------------------------------------------
# cross-validation and ranking


def planted_dataset(n=60, sep=3.0, seed=0, signal="time"):
    rng = np.random.default_rng(seed)
    cols = layout_for("B")
    y = np.repeat([1, 0], n // 2)
    X = rng.normal(size=(n, len(cols)))
    X[:, subset_columns(cols, signal)] += sep * y[:, None]
    labels = ["covid" if v else "healthy" for v in y]
    return LabeledDataset(X, labels, "B", [f"p{i}" for i in range(n)], cols)


@pytest.mark.parametrize("kind", ["ADA", "KNN", "LR", "RF", "SVM"])
def test_cv_separable(kind):
    res = cross_validate(planted_dataset(), kind, "time", n_folds=5, seed=1)
    assert len(res.folds) == 5
    assert res.mean("roc_auc") >= 0.95


def test_cv_shuffled_null_lr():
    ds = planted_dataset(80, sep=0.0, seed=2)
    aucs = []
    for seed in range(20):
        perm = np.random.default_rng(seed).permutation(len(ds))
        shuffled = LabeledDataset(ds.rows, [ds.labels[i] for i in perm], "B", ds.participant_ids, ds.columns)
        aucs.append(cross_validate(shuffled, "LR", "time", 5, seed).mean())
    assert 0.4 <= np.mean(aucs) <= 0.6


def test_cv_deterministic():
    ds = planted_dataset(40, sep=0.5, seed=4)
    a = cross_validate(ds, "RF", "time", seed=9).to_dict(curves=True)
    b = cross_validate(ds, "RF", "time", seed=9).to_dict(curves=True)
    assert a == b


def test_run_grid_parallel_matches_serial():
    ds = planted_dataset(40, sep=1.0, seed=5)
    tasks = [(ds, k, "time", 5, 0, None, 0.5) for k in ("LR", "KNN")]
    serial = [r.to_dict() for r in run_grid(tasks, 1)]
    parallel = [r.to_dict() for r in run_grid(tasks, 2)]
    assert serial == parallel


def test_rank_single_subset():
    rk = rank_features(planted_dataset(40, seed=6), ["LR"], ["time"], n_folds=4)
    assert [s for s, _ in rk.overall] == ["time"]
    assert rk.per_model["LR"] == ["time"]


def test_rank_tie_broken_by_name():
    res = cross_validate(planted_dataset(40, sep=0.5, seed=7), "LR", "time", n_folds=4)
    rk = rank_from_cells({("LR", "zeta"): res, ("LR", "alpha"): res}, ["LR"], ["zeta", "alpha"])
    assert [s for s, _ in rk.overall] == ["alpha", "zeta"]


def test_rank_orders_by_signal():
    rk = rank_features(planted_dataset(60, sep=1.5, seed=8, signal="cepstral"), ["LR", "KNN"],
                       ["time", "cepstral"], n_folds=5)
    assert rk.position("cepstral") < rk.position("time")


# ---------------------------------------------------------------------------
# repeated-measures ANOVA

TEXTBOOK = np.array([  # 4 subjects x 3 conditions
    [45.0, 50.0, 55.0],
    [42.0, 42.0, 45.0],
    [36.0, 41.0, 43.0],
    [39.0, 35.0, 40.0],
])


def test_anova_textbook_vs_hand_ss():
    f, p = rm_anova(TEXTBOOK)
    f_hand, df1, df2 = hand_anova(TEXTBOOK.tolist())
    assert abs(f - f_hand) < 1e-9
    assert p == pytest.approx(special.fdtrc(df1, df2, f_hand), abs=1e-12)


def test_anova_vs_statsmodels():
    import pandas as pd
    from statsmodels.stats.anova import AnovaRM

    s, c = TEXTBOOK.shape
    df = pd.DataFrame({"subject": np.repeat(np.arange(s), c), "cond": np.tile(np.arange(c), s),
                       "value": TEXTBOOK.ravel()})
    ref = AnovaRM(df, "value", "subject", within=["cond"]).fit().anova_table
    f, p = rm_anova(TEXTBOOK)
    assert f == pytest.approx(ref["F Value"].iloc[0], rel=1e-9)
    assert p == pytest.approx(ref["Pr > F"].iloc[0], rel=1e-9)


def test_anova_identical_columns():
    col = np.array([[0.8], [0.7], [0.9], [0.75], [0.85]])
    assert rm_anova(np.hstack([col, col, col])) == (0.0, 1.0)


def test_anova_zero_error_variance():
    x = np.array([[1.0], [2.0], [4.0]]) + np.array([[0.0, 1.0, 3.0]])
    with pytest.raises(DegenerateVarianceError):
        rm_anova(x)


def test_f_survival_quadrature():
    d1, d2 = 1, 4

    def density(x):
        return (math.sqrt((d1 * x) ** d1 * d2 ** d2 / (d1 * x + d2) ** (d1 + d2))
                / (x * special.beta(d1 / 2, d2 / 2)))

    tail, _ = integrate.quad(density, 1.0, np.inf, epsabs=1e-13)
    assert abs(f_survival(1.0, d1, d2) - tail) < 1e-6
    for f in (0.3, 1.0, 4.2, 17.0):
        assert f_survival(f, 3, 12) == pytest.approx(stats.f.sf(f, 3, 12), rel=1e-10)


@given(st.integers(3, 8), st.integers(2, 5), st.integers(0, 2 ** 16))
def test_anova_random_vs_hand(s, c, seed):
    x = np.random.default_rng(seed).normal(size=(s, c))
    t = rm_anova_table(x)
    f_hand, df1, df2 = hand_anova(x.tolist())
    assert t.f == pytest.approx(f_hand, rel=1e-9)
    assert (t.df_conditions, t.df_error) == (df1, df2)
    assert 0 <= t.p <= 1
