import math

import numpy as np
import pytest

from psmdetect.config import default_config
from psmdetect.errors import (
    DegenerateVariance,
    InvalidParams,
    LengthMismatch,
    TooFewSamples,
)
from psmdetect.evaluate import (
    CvResult,
    build_fold_data,
    cross_validate,
    evaluate_on_folds,
    f1_scores,
    feature_group_importance,
    regularized_incomplete_beta,
    stratified_kfold,
    student_t_cdf,
    welch_ttest,
)
from psmdetect.learn import NORMAL, PSM, LabeledDataset


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def t_pdf(x, df):
    return (
        math.gamma((df + 1) / 2)
        / (math.sqrt(df * math.pi) * math.gamma(df / 2))
        * (1 + x * x / df) ** (-(df + 1) / 2)
    )


def t_tail_by_quadrature(t, df, upper=2000.0, n=400_000):
    """P(T >= t) by composite Simpson integration of the density. The wide
    upper limit keeps the truncated tail below 1e-9 even for small df."""
    x = np.linspace(t, upper, n + 1)
    pdf = (
        math.gamma((df + 1) / 2)
        / (math.sqrt(df * math.pi) * math.gamma(df / 2))
        * (1 + x * x / df) ** (-(df + 1) / 2)
    )
    weights = np.ones(n + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    h = (upper - t) / n
    return float(np.sum(weights * pdf) * h / 3)


def test_t_cdf_against_quadrature():
    for t, df in ((1.0, 8.0), (2.5, 3.0), (0.3, 20.0), (-1.7, 5.0)):
        want = 1.0 - t_tail_by_quadrature(t, df)
        assert student_t_cdf(t, df) == pytest.approx(want, abs=1e-7)


def test_incomplete_beta_boundaries_and_symmetry():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    # I_x(a, b) = 1 - I_{1-x}(b, a)
    for a, b, x in ((2.0, 3.0, 0.4), (0.5, 5.0, 0.9), (4.0, 0.5, 0.2)):
        lhs = regularized_incomplete_beta(a, b, x)
        rhs = 1.0 - regularized_incomplete_beta(b, a, 1.0 - x)
        assert lhs == pytest.approx(rhs, abs=1e-12)
    # closed form: I_x(1, 1) = x
    assert regularized_incomplete_beta(1.0, 1.0, 0.37) == pytest.approx(0.37, abs=1e-12)


# ---------------------------------------------------------------------------
# Welch t-test
# ---------------------------------------------------------------------------

def test_welch_spec_fixture():
    t, df, p = welch_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6], "two_sided")
    assert t == pytest.approx(-1.0, abs=1e-9)
    assert df == pytest.approx(8.0, abs=1e-9)
    assert p == pytest.approx(0.3466, abs=1e-3)


def test_welch_identical_samples():
    t, _, p = welch_ttest([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], "two_sided")
    assert t == 0.0
    assert p == pytest.approx(1.0, abs=1e-12)


def test_welch_tail_modes_complement():
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.normal(size=6)
        b = rng.normal(loc=0.5, size=9)
        _, _, p_ab = welch_ttest(a, b, "greater")
        _, _, p_ba = welch_ttest(b, a, "greater")
        assert p_ab + p_ba == pytest.approx(1.0, abs=1e-12)
        _, _, p_less = welch_ttest(a, b, "less")
        assert p_less == pytest.approx(p_ba, abs=1e-12)
        _, _, p_two = welch_ttest(a, b, "two_sided")
        assert p_two == pytest.approx(2 * min(p_ab, 1 - p_ab), abs=1e-12)


def test_welch_errors():
    with pytest.raises(DegenerateVariance):
        welch_ttest([1.0, 1.0], [2.0, 2.0])
    with pytest.raises(InvalidParams):
        welch_ttest([1.0], [1.0, 2.0])
    with pytest.raises(InvalidParams):
        welch_ttest([1.0, 2.0], [1.0, 2.0], tail="sideways")


# ---------------------------------------------------------------------------
# Folds and F1
# ---------------------------------------------------------------------------

def labels_of(n_psm, n_normal):
    return np.array([PSM] * n_psm + [NORMAL] * n_normal, dtype=object)


def test_kfold_partition_properties():
    labels = labels_of(25, 75)
    folds = stratified_kfold(labels, 10, seed=1)
    assert len(folds) == 10
    union = np.concatenate(folds)
    assert sorted(union.tolist()) == list(range(100))
    sizes = [len(f) for f in folds]
    assert all(size == 10 for size in sizes)
    for fold in folds:
        psm_count = int(np.sum(labels[fold] == PSM))
        assert abs(psm_count - 2.5) <= 0.5


def test_kfold_five_by_five():
    labels = labels_of(5, 5)
    folds = stratified_kfold(labels, 5, seed=0)
    for fold in folds:
        assert len(fold) == 2
        assert set(labels[fold]) == {PSM, NORMAL}


def test_kfold_size_balance_with_remainders():
    labels = labels_of(5, 5)
    folds = stratified_kfold(labels, 4, seed=3)
    sizes = sorted(len(f) for f in folds)
    assert max(sizes) - min(sizes) <= 1
    assert sum(sizes) == 10


def test_kfold_too_few():
    with pytest.raises(TooFewSamples):
        stratified_kfold(labels_of(3, 50), 5, seed=0)


def test_kfold_deterministic():
    labels = labels_of(30, 70)
    a = stratified_kfold(labels, 10, seed=9)
    b = stratified_kfold(labels, 10, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = stratified_kfold(labels, 10, seed=10)
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_f1_perfect_and_degenerate():
    assert f1_scores([PSM, NORMAL], [PSM, NORMAL]) == (1.0, 1.0)
    f1_psm, f1_macro = f1_scores(
        [PSM, PSM, NORMAL, NORMAL], [PSM, NORMAL, NORMAL, NORMAL]
    )
    assert f1_psm == pytest.approx(2 / 3)
    assert f1_macro == pytest.approx((2 / 3 + 0.8) / 2)
    f1_psm, _ = f1_scores([PSM, NORMAL], [NORMAL, NORMAL])
    assert f1_psm == 0.0
    with pytest.raises(LengthMismatch):
        f1_scores([PSM], [PSM, NORMAL])
    with pytest.raises(LengthMismatch):
        f1_scores([], [])


# ---------------------------------------------------------------------------
# Cross-validation on a fixed matrix
# ---------------------------------------------------------------------------

def separable_dataset(n=120, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array([1] * (n // 3) + [0] * (n - n // 3))
    X = rng.normal(size=(n, 4))
    X[:, 1] += 3.0 * y
    labels = np.array([PSM if v else NORMAL for v in y], dtype=object)
    return LabeledDataset(X, labels, [f"f{i}" for i in range(4)])


def test_cross_validate_separable_and_deterministic():
    config = default_config()
    config.gbdt.n_estimators = 30
    data = separable_dataset()
    report = cross_validate(data, "gbdt", config, k=10, seed=5)
    result = report.cv["gbdt"]
    assert len(result.f1_psm_folds) == 10
    assert result.mean_f1_psm >= 0.95
    again = cross_validate(data, "gbdt", config, k=10, seed=5)
    assert again.cv["gbdt"].f1_psm_folds == result.f1_psm_folds
    assert report.to_dict()["classifiers"]["gbdt"]["mean_f1_psm"] == result.mean_f1_psm


def test_threads_do_not_change_results():
    config = default_config()
    config.gbdt.n_estimators = 20
    data = separable_dataset(seed=3)
    folds1 = build_fold_data(data, 5, seed=2)
    folds4 = build_fold_data(data, 5, seed=2, threads=4)
    r1 = evaluate_on_folds(data, folds1, "gbdt", config, threads=1)
    r4 = evaluate_on_folds(data, folds4, "gbdt", config, threads=4)
    assert r1.f1_psm_folds == r4.f1_psm_folds


def test_unknown_classifier_rejected():
    config = default_config()
    with pytest.raises(InvalidParams):
        cross_validate(separable_dataset(), "svm", config, k=5)


def test_group_importance_planted_source_signal():
    """Signal lives only in the source column range; that group must rank
    first."""
    from psmdetect.features import FEATURE_GROUPS, N_FEATURES

    rng = np.random.default_rng(4)
    n = 160
    y = np.array([1] * 40 + [0] * 120)
    X = rng.normal(size=(n, N_FEATURES))
    start, stop = FEATURE_GROUPS["source"]
    X[:, start] += 4.0 * y
    X[:, start + 7] -= 2.5 * y
    labels = np.array([PSM if v else NORMAL for v in y], dtype=object)
    data = LabeledDataset(X, labels, [])
    config = default_config()
    config.gbdt.n_estimators = 25
    folds = build_fold_data(data, 5, seed=6)
    groups = feature_group_importance(data, config, folds)
    assert set(groups) == {"user", "source", "content"}
    best = max(groups, key=lambda g: groups[g].mean_f1_psm)
    assert best == "source"


def test_cv_result_means():
    r = CvResult("x", [0.5, 0.7], [0.6, 0.8])
    assert r.mean_f1_psm == pytest.approx(0.6)
    assert r.mean_f1_macro == pytest.approx(0.7)
