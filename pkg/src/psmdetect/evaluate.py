"""Stratified tenfold cross-validation, F1 metrics, Welch t-tests, and
feature-group importance.

Welch's unequal-variance statistic is used throughout because the two
account classes differ wildly in size and spread. Its p-values come from
the Student-t CDF evaluated in-repo through the regularized incomplete
beta function (modified Lentz continued fraction, tolerance 1e-12), so
there is no dependence on an external stats library.

Cross-validation refits whatever needs fitting on the training split only:
when a FeatureExtractor is supplied, each fold gets its own topic model
and TF-IDF vocabulary built from that fold's training users before any
classifier sees a row.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig, derive_seed
from .errors import (
    DegenerateVariance,
    InvalidParams,
    LengthMismatch,
    TooFewSamples,
)
from .features import FEATURE_GROUPS, FeatureExtractor
from . import learn
from .learn import LabeledDataset

PSM = learn.PSM
NORMAL = learn.NORMAL


# ---------------------------------------------------------------------------
# Folds and metrics
# ---------------------------------------------------------------------------

def stratified_kfold(labels, k: int, seed: int = 0) -> list[np.ndarray]:
    """Partition indices into k folds preserving class proportions.

    Remainder samples rotate across folds so overall fold sizes differ by
    at most one and per-class counts by at most one.
    """
    labels = np.asarray(labels, dtype=object)
    if k < 2:
        raise InvalidParams(f"k must be >= 2, got {k}")
    classes = sorted(set(labels))
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise TooFewSamples(
                f"class {cls!r} has {len(idx)} samples, fewer than k={k}"
            )
        perm = idx[rng.permutation(len(idx))]
        base, rem = divmod(len(perm), k)
        pos = 0
        for f in range(k):
            size = base + (1 if (f - cursor) % k < rem else 0)
            folds[f].extend(perm[pos:pos + size].tolist())
            pos += size
        cursor = (cursor + rem) % k
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


def f1_scores(true_labels, predicted_labels) -> tuple[float, float]:
    """(f1 for the PSM class, macro F1 over both classes)."""
    true_labels = np.asarray(true_labels, dtype=object)
    predicted_labels = np.asarray(predicted_labels, dtype=object)
    if len(true_labels) != len(predicted_labels) or len(true_labels) == 0:
        raise LengthMismatch("label sequences must have equal, non-zero length")

    def class_f1(cls) -> float:
        tp = np.sum((true_labels == cls) & (predicted_labels == cls))
        fp = np.sum((true_labels != cls) & (predicted_labels == cls))
        fn = np.sum((true_labels == cls) & (predicted_labels != cls))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall == 0.0:
            return 0.0
        return 2.0 * precision * recall / (precision + recall)

    f1_psm = class_f1(PSM)
    f1_macro = (f1_psm + class_f1(NORMAL)) / 2.0
    return float(f1_psm), float(f1_macro)


# ---------------------------------------------------------------------------
# Welch two-sample t-test
# ---------------------------------------------------------------------------

_BETA_EPS = 1e-12
_BETA_FPMIN = 1e-300
_BETA_MAXIT = 400


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETA_FPMIN:
        d = _BETA_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETA_FPMIN:
            d = _BETA_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _BETA_FPMIN:
            c = _BETA_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by modified Lentz continued fraction."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """P(T <= t) for Student's t with df degrees of freedom."""
    if df <= 0:
        raise InvalidParams("degrees of freedom must be positive")
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)  # P(T >= |t|)
    return tail if t < 0 else 1.0 - tail


def welch_ttest(a, b, tail: str = "two_sided") -> tuple[float, float, float]:
    """Welch's t statistic, Welch-Satterthwaite df, and the p-value.

    tail: 'two_sided', 'greater' (alternative mean(a) > mean(b)), or
    'less'.
    """
    if tail not in ("two_sided", "greater", "less"):
        raise InvalidParams(f"unknown tail {tail!r}")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise InvalidParams("both samples need at least two values")
    na, nb = len(a), len(b)
    va = float(np.var(a, ddof=1))
    vb = float(np.var(b, ddof=1))
    se2 = va / na + vb / nb
    if se2 <= 0.0:
        raise DegenerateVariance("both samples are constant")
    t = (float(np.mean(a)) - float(np.mean(b))) / math.sqrt(se2)
    df = se2 * se2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    cdf = student_t_cdf(t, df)
    sf = 1.0 - cdf
    if tail == "greater":
        p = sf
    elif tail == "less":
        p = cdf
    else:
        p = 2.0 * min(sf, 1.0 - sf)
    return t, df, p


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CvResult:
    classifier: str
    f1_psm_folds: list[float]
    f1_macro_folds: list[float]

    @property
    def mean_f1_psm(self) -> float:
        return float(np.mean(self.f1_psm_folds))

    @property
    def mean_f1_macro(self) -> float:
        return float(np.mean(self.f1_macro_folds))

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "mean_f1_psm": self.mean_f1_psm,
            "mean_f1_macro": self.mean_f1_macro,
            "f1_psm_folds": self.f1_psm_folds,
            "f1_macro_folds": self.f1_macro_folds,
        }


@dataclass
class TTestResult:
    feature: str
    t: float
    df: float
    p: float
    tail: str

    def to_dict(self) -> dict:
        return {"feature": self.feature, "t": self.t, "df": self.df,
                "p": self.p, "tail": self.tail}


@dataclass
class EvaluationReport:
    folds: int
    seed: int
    cv: dict[str, CvResult] = field(default_factory=dict)
    group_importance: dict[str, CvResult] = field(default_factory=dict)
    ttests: list[TTestResult] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "seed": self.seed,
            "classifiers": {k: v.to_dict() for k, v in sorted(self.cv.items())},
            "group_importance": {
                k: v.to_dict() for k, v in sorted(self.group_importance.items())
            },
            "ttests": [t.to_dict() for t in self.ttests],
        }


CLASSIFIER_KINDS = ("gbdt", "rf", "dt", "lr", "nb")


def make_trainer(kind: str, config: PipelineConfig, seed: int):
    """Trainer closure for a classifier kind using the config's
    hyperparameters."""
    if kind == "gbdt":
        cfg = config.gbdt
        return lambda data: learn.train_gbdt(
            data, cfg.n_estimators, cfg.learning_rate, cfg.max_depth, seed
        )
    if kind == "rf":
        cfg = config.forest
        return lambda data: learn.train_random_forest(
            data, cfg.n_estimators, cfg.criterion, seed, cfg.max_depth
        )
    if kind == "dt":
        cfg = config.tree
        return lambda data: learn.train_decision_tree(
            data, cfg.criterion, cfg.max_depth, seed
        )
    if kind == "lr":
        cfg = config.logreg
        return lambda data: learn.train_logreg(data, cfg.c, cfg.tolerance, cfg.max_iters)
    if kind == "nb":
        return learn.train_nb
    raise InvalidParams(f"unknown classifier {kind!r}; expected one of {CLASSIFIER_KINDS}")


@dataclass
class FoldData:
    """One fold's index split plus the matrix rebuilt with that fold's
    text models (None means the shared dataset matrix is leak-free)."""

    train_idx: np.ndarray
    test_idx: np.ndarray
    matrix: np.ndarray | None = None


def build_fold_data(
    dataset: LabeledDataset,
    k: int,
    seed: int,
    extractor: FeatureExtractor | None = None,
    row_users: list[str] | None = None,
    threads: int = 1,
) -> list[FoldData]:
    """Stratified folds; with an extractor, refit text models per fold and
    rebuild every row with them."""
    folds = stratified_kfold(dataset.labels, k, seed)
    all_idx = np.arange(len(dataset.labels))
    splits = [
        (np.setdiff1d(all_idx, test_idx), test_idx) for test_idx in folds
    ]
    if extractor is None:
        return [FoldData(train_idx, test_idx) for train_idx, test_idx in splits]
    if row_users is None:
        raise InvalidParams("row_users is required when refitting per fold")

    def build(fold_and_split):
        fold, (train_idx, test_idx) = fold_and_split
        train_users = {row_users[i] for i in train_idx}
        models = extractor.fit_text_models(train_users, seed_tag=f"fold{fold}")
        matrix = extractor.matrix(models, row_users)
        return FoldData(train_idx, test_idx, matrix)

    items = list(enumerate(splits))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, items))
    return [build(item) for item in items]


def evaluate_on_folds(
    dataset: LabeledDataset,
    fold_data: list[FoldData],
    kind: str,
    config: PipelineConfig,
    columns: tuple[int, int] | None = None,
    threads: int = 1,
) -> CvResult:
    """Train/test the classifier on each fold, optionally restricted to a
    column range of the feature matrix."""
    trainer = make_trainer(kind, config, derive_seed(config.seed, "train", kind))

    def run(fold: FoldData) -> tuple[float, float]:
        matrix = fold.matrix if fold.matrix is not None else dataset.matrix
        if columns is not None:
            matrix = matrix[:, columns[0]:columns[1]]
        train = LabeledDataset(
            matrix=matrix[fold.train_idx],
            labels=dataset.labels[fold.train_idx],
            column_names=dataset.column_names,
        )
        model = trainer(train)
        predicted = learn.predict_labels(model, matrix[fold.test_idx])
        return f1_scores(dataset.labels[fold.test_idx], predicted)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(run, fold_data))
    else:
        pairs = [run(fold) for fold in fold_data]
    return CvResult(
        classifier=kind,
        f1_psm_folds=[p for p, _ in pairs],
        f1_macro_folds=[m for _, m in pairs],
    )


def cross_validate(
    dataset: LabeledDataset,
    kind: str,
    config: PipelineConfig,
    k: int = 10,
    seed: int | None = None,
    extractor: FeatureExtractor | None = None,
    row_users: list[str] | None = None,
    threads: int = 1,
) -> EvaluationReport:
    """Tenfold (by default) cross-validation of one classifier."""
    if seed is None:
        seed = derive_seed(config.seed, "cv")
    fold_data = build_fold_data(dataset, k, seed, extractor, row_users, threads)
    result = evaluate_on_folds(dataset, fold_data, kind, config, threads=threads)
    report = EvaluationReport(folds=k, seed=seed)
    report.cv[kind] = result
    return report


def feature_group_importance(
    dataset: LabeledDataset,
    config: PipelineConfig,
    fold_data: list[FoldData],
    threads: int = 1,
) -> dict[str, CvResult]:
    """Train the boosted-tree classifier on each feature group alone over
    the same folds; groups are then comparable by mean PSM F1."""
    return {
        group: evaluate_on_folds(
            dataset, fold_data, "gbdt", config, columns=span, threads=threads
        )
        for group, span in FEATURE_GROUPS.items()
    }


def content_feature_ttests(extractor: FeatureExtractor) -> list[TTestResult]:
    """Class-difference tests on the per-user content statistics: has-quote
    two-sided, complexity and readability one-tailed with the PSM class
    hypothesized greater. Restricted to labeled users that shared at least
    one URL with usable content, since the statistics are undefined (zero)
    otherwise."""
    uids, labels = extractor.labeled_users()
    index = {uid: i for i, uid in enumerate(extractor.user_ids)}
    with_content = extractor.users_with_content()
    keep = [i for i, uid in enumerate(uids) if uid in with_content]
    stats = extractor.content_stats()[[index[uids[i]] for i in keep]]
    kept_labels = labels[keep]
    psm_mask = kept_labels == PSM
    out = []
    for col, (name, tail) in enumerate(
        (
            ("has_quote", "two_sided"),
            ("complexity", "greater"),
            ("readability", "greater"),
        )
    ):
        t, df, p = welch_ttest(stats[psm_mask, col], stats[~psm_mask, col], tail)
        out.append(TTestResult(feature=name, t=t, df=df, p=p, tail=tail))
    return out
