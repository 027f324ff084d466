"""In-repo supervised classifiers over the fused feature vectors.

Tree learners (decision tree, random forest, gradient-boosted trees) share
one compiled growth kernel family: features are argsorted once per fit and
the sorted orders are partitioned down the tree, so finding a node's best
split is a linear scan. Split candidates are midpoints between consecutive
distinct sorted values; ties on gain resolve to the lowest feature index,
then the lowest threshold. Splits with zero gain are allowed on impure
nodes (an axis split of XOR-style data reduces impurity only at depth
two, so refusing them would stall the greedy recursion).

Logistic regression is Newton's method with backtracking on

    mean logistic loss + ||w||^2 / (2 * C * n),

bias unregularized. Naive Bayes is multinomial with add-one smoothing;
inputs are clamped at zero because causality attributes can be negative.

predict_proba returns P(PSM); labels threshold at 0.5 with ties going to
NORMAL.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import (
    InvalidParams,
    ModelFormatError,
    NonFinite,
    SingleClass,
    WidthMismatch,
)

PSM = "psm"
NORMAL = "normal"

MODEL_MAGIC = "PSMMODEL/1"

_GINI = 0
_ENTROPY = 1


@dataclass
class LabeledDataset:
    matrix: np.ndarray  # (n, n_features) float64
    labels: np.ndarray  # (n,) of "psm" / "normal"
    column_names: list[str] = field(default_factory=list)

    def y01(self) -> np.ndarray:
        return (self.labels == PSM).astype(np.float64)


@dataclass
class Tree:
    feature: np.ndarray  # int32, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass
class TreeEnsembleModel:
    kind: str  # "dt" | "rf" | "gbdt"
    trees: list[Tree]
    learning_rate: float
    base_score: float
    seed: int
    n_features: int
    training_loss: list[float] = field(default_factory=list)


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    regularization: float  # the C in 1/(2*C*n)


@dataclass
class NaiveBayesModel:
    class_log_prior: np.ndarray  # [normal, psm]
    feature_log_prob: np.ndarray  # (2, n_features)


# ---------------------------------------------------------------------------
# Compiled tree kernels
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _impurity(q: float, criterion: int) -> float:
    if criterion == _GINI:
        return 2.0 * q * (1.0 - q)
    h = 0.0
    if q > 0.0:
        h -= q * np.log2(q)
    if q < 1.0:
        h -= (1.0 - q) * np.log2(1.0 - q)
    return h


@njit(cache=True, nogil=True)
def _partition(ordT, X, tmp, start, end, best_f, best_thr):
    n_left = 0
    col = ordT[best_f]
    for p in range(start, end):
        if X[col[p], best_f] <= best_thr:
            n_left += 1
    for f in range(ordT.shape[0]):
        col = ordT[f]
        il = 0
        ir = 0
        for p in range(start, end):
            row = col[p]
            if X[row, best_f] <= best_thr:
                tmp[start + il] = row
                il += 1
            else:
                tmp[start + n_left + ir] = row
                ir += 1
        for p in range(start, end):
            col[p] = tmp[p]
    return n_left


@njit(cache=True, nogil=True)
def _grow_class(ordT, X, y, w, max_depth, min_leaf, criterion, mf, rand_feats,
                feature, threshold, left, right, value, tmp, feats_buf):
    n_features, n = ordT.shape
    stack = np.empty((2 * n + 4, 4), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    n_nodes = 1
    cursor = 0
    while top >= 0:
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        top -= 1
        m = end - start
        col0 = ordT[0]
        wt = 0.0
        wy = 0.0
        for p in range(start, end):
            row = col0[p]
            wt += w[row]
            wy += w[row] * y[row]
        feature[node] = -1
        value[node] = wy / wt if wt > 0.0 else 0.5
        if depth >= max_depth or m < 2 or wt < 2.0 * min_leaf:
            continue
        if wy <= 0.0 or wy >= wt:  # pure node
            continue

        if mf < n_features:
            for i in range(n_features):
                feats_buf[i] = i
            for i in range(mf):
                j = i + rand_feats[cursor] % (n_features - i)
                cursor += 1
                feats_buf[i], feats_buf[j] = feats_buf[j], feats_buf[i]
            cand = np.sort(feats_buf[:mf])
            n_cand = mf
        else:
            for i in range(n_features):
                feats_buf[i] = i
            cand = feats_buf
            n_cand = n_features

        imp_parent = _impurity(wy / wt, criterion)
        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        for ci in range(n_cand):
            f = cand[ci]
            col = ordT[f]
            cwl = 0.0
            cwyl = 0.0
            for p in range(start, end - 1):
                row = col[p]
                cwl += w[row]
                cwyl += w[row] * y[row]
                a = X[row, f]
                b = X[col[p + 1], f]
                if a == b:
                    continue
                cwr = wt - cwl
                if cwl < min_leaf or cwr < min_leaf:
                    continue
                imp_l = _impurity(cwyl / cwl, criterion)
                imp_r = _impurity((wy - cwyl) / cwr, criterion)
                gain = imp_parent - (cwl * imp_l + cwr * imp_r) / wt
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0:
            continue

        n_left = _partition(ordT, X, tmp, start, end, best_f, best_thr)
        if n_left == 0 or n_left == m:
            continue
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
    return n_nodes


@njit(cache=True, nogil=True)
def _grow_reg(ordT, X, g, h, max_depth, min_leaf,
              feature, threshold, left, right, value, tmp):
    n_features, n = ordT.shape
    stack = np.empty((2 * n + 4, 4), np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    n_nodes = 1
    while top >= 0:
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        top -= 1
        m = end - start
        col0 = ordT[0]
        tot_g = 0.0
        tot_h = 0.0
        tot_g2 = 0.0
        for p in range(start, end):
            row = col0[p]
            tot_g += g[row]
            tot_h += h[row]
            tot_g2 += g[row] * g[row]
        feature[node] = -1
        value[node] = tot_g / (tot_h + 1e-16)  # Newton step for the leaf
        sse = tot_g2 - tot_g * tot_g / m
        if depth >= max_depth or m < 2 * min_leaf or m < 2 or sse <= 1e-12:
            continue

        parent = tot_g * tot_g / m
        best_gain = -1.0
        best_f = -1
        best_thr = 0.0
        for f in range(n_features):
            col = ordT[f]
            cum = 0.0
            for p in range(start, end - 1):
                row = col[p]
                cum += g[row]
                a = X[row, f]
                b = X[col[p + 1], f]
                if a == b:
                    continue
                nl = p - start + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                rest = tot_g - cum
                gain = cum * cum / nl + rest * rest / nr - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0:
            continue

        n_left = _partition(ordT, X, tmp, start, end, best_f, best_thr)
        if n_left == 0 or n_left == m:
            continue
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + n_left
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = start + n_left
        stack[top, 2] = end
        stack[top, 3] = depth + 1
    return n_nodes


@njit(cache=True, nogil=True)
def _accumulate_tree(feature, threshold, left, right, value, X, out, scale):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += scale * value[node]


# ---------------------------------------------------------------------------
# Tree trainers
# ---------------------------------------------------------------------------

def _check_training_data(data: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(data.matrix, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training matrix contains non-finite values")
    y = data.y01()
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise SingleClass("training data must contain both classes")
    return X, y


def _presort(X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int32))


def _alloc_tree(n: int):
    cap = 2 * n + 1
    return (
        np.full(cap, -1, np.int32),
        np.zeros(cap),
        np.zeros(cap, np.int32),
        np.zeros(cap, np.int32),
        np.zeros(cap),
    )


def _fit_class_tree(ordT, X, y, w, max_depth, criterion_id, mf, rand_feats) -> Tree:
    n = X.shape[0]
    feature, threshold, left, right, value = _alloc_tree(n)
    tmp = np.empty(n, np.int32)
    feats_buf = np.empty(X.shape[1], np.int32)
    n_nodes = _grow_class(
        ordT, X, y, w, max_depth, 1.0, criterion_id, mf, rand_feats,
        feature, threshold, left, right, value, tmp, feats_buf,
    )
    return Tree(
        feature=feature[:n_nodes].copy(),
        threshold=threshold[:n_nodes].copy(),
        left=left[:n_nodes].copy(),
        right=right[:n_nodes].copy(),
        value=value[:n_nodes].copy(),
    )


def _criterion_id(criterion: str) -> int:
    if criterion == "gini":
        return _GINI
    if criterion == "entropy":
        return _ENTROPY
    raise InvalidParams(f"criterion must be 'gini' or 'entropy', got {criterion!r}")


def _depth_cap(max_depth, n: int) -> int:
    return n if max_depth is None else int(max_depth)


def train_decision_tree(
    data: LabeledDataset,
    criterion: str = "gini",
    max_depth: int | None = None,
    seed: int = 0,
) -> TreeEnsembleModel:
    """Greedy recursive splitting maximizing impurity decrease; leaves hold
    the class probability. Fully deterministic regardless of seed."""
    X, y = _check_training_data(data)
    crit = _criterion_id(criterion)
    ordT = _presort(X)
    w = np.ones(len(y))
    no_rand = np.zeros(1, np.int64)
    tree = _fit_class_tree(
        ordT.copy(), X, y, w, _depth_cap(max_depth, len(y)), crit, X.shape[1], no_rand
    )
    return TreeEnsembleModel(
        kind="dt", trees=[tree], learning_rate=0.0, base_score=0.0,
        seed=seed, n_features=X.shape[1],
    )


def train_random_forest(
    data: LabeledDataset,
    n_estimators: int = 200,
    criterion: str = "entropy",
    seed: int = 0,
    max_depth: int | None = None,
) -> TreeEnsembleModel:
    """Bootstrap-aggregated trees with sqrt(n_features) candidates per
    split; the prediction is the mean of tree class probabilities."""
    if n_estimators < 1:
        raise InvalidParams("n_estimators must be >= 1")
    X, y = _check_training_data(data)
    crit = _criterion_id(criterion)
    n, n_features = X.shape
    mf = max(1, int(math.sqrt(n_features)))
    ordT = _presort(X)
    depth = _depth_cap(max_depth, n)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_estimators):
        bag = rng.integers(0, n, n)
        w = np.bincount(bag, minlength=n).astype(np.float64)
        rand_feats = rng.integers(0, 2**31, size=(2 * n + 2) * mf)
        trees.append(_fit_class_tree(ordT.copy(), X, y, w, depth, crit, mf, rand_feats))
    return TreeEnsembleModel(
        kind="rf", trees=trees, learning_rate=0.0, base_score=0.0,
        seed=seed, n_features=n_features,
    )


def train_gbdt(
    data: LabeledDataset,
    n_estimators: int = 200,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    seed: int = 0,
) -> TreeEnsembleModel:
    """Boosted regression trees under binary logistic loss: each stage fits
    a least-squares tree to the residuals y - p and re-estimates leaf
    values with a Newton step; prediction is
    sigmoid(base + lr * sum of trees)."""
    if n_estimators < 1 or learning_rate <= 0:
        raise InvalidParams("need n_estimators >= 1 and learning_rate > 0")
    X, y = _check_training_data(data)
    n = len(y)
    p_mean = float(np.mean(y))
    base = math.log(p_mean / (1.0 - p_mean))
    raw = np.full(n, base)
    ordT = _presort(X)
    tmp = np.empty(n, np.int32)
    trees = []
    losses = []
    for _ in range(n_estimators):
        p = _sigmoid(raw)
        g = y - p
        h = p * (1.0 - p)
        feature, threshold, left, right, value = _alloc_tree(n)
        n_nodes = _grow_reg(
            ordT.copy(), X, g, h, max_depth, 1,
            feature, threshold, left, right, value, tmp,
        )
        tree = Tree(
            feature=feature[:n_nodes].copy(),
            threshold=threshold[:n_nodes].copy(),
            left=left[:n_nodes].copy(),
            right=right[:n_nodes].copy(),
            value=value[:n_nodes].copy(),
        )
        trees.append(tree)
        _accumulate_tree(
            tree.feature, tree.threshold, tree.left, tree.right, tree.value,
            X, raw, learning_rate,
        )
        losses.append(float(np.mean(np.logaddexp(0.0, raw) - y * raw)))
    return TreeEnsembleModel(
        kind="gbdt", trees=trees, learning_rate=learning_rate, base_score=base,
        seed=seed, n_features=X.shape[1], training_loss=losses,
    )


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))


def logreg_objective(
    weights: np.ndarray, bias: float, X: np.ndarray, y01: np.ndarray, c: float
) -> tuple[float, np.ndarray, float]:
    """Mean logistic loss plus ||w||^2/(2*C*n); returns (loss, grad_w, grad_b).

    Kept public so the analytic gradient can be checked against finite
    differences.
    """
    n = len(y01)
    raw = X @ weights + bias
    loss = float(np.mean(np.logaddexp(0.0, raw) - y01 * raw))
    loss += float(weights @ weights) / (2.0 * c * n)
    p = _sigmoid(raw)
    grad_w = X.T @ (p - y01) / n + weights / (c * n)
    grad_b = float(np.mean(p - y01))
    return loss, grad_w, grad_b


def train_logreg(
    data: LabeledDataset,
    l2_c: float = 1.0,
    tolerance: float = 0.01,
    max_iters: int = 100,
) -> LinearModel:
    """Newton's method with backtracking line search; stops when the
    gradient infinity-norm drops below the tolerance."""
    if l2_c <= 0:
        raise InvalidParams("l2_c must be > 0")
    X = np.ascontiguousarray(data.matrix, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training matrix contains non-finite values")
    y = data.y01()
    n, n_features = X.shape
    w = np.zeros(n_features)
    b = 0.0
    loss, grad_w, grad_b = logreg_objective(w, b, X, y, l2_c)
    for _ in range(max_iters):
        if max(np.max(np.abs(grad_w), initial=0.0), abs(grad_b)) < tolerance:
            break
        p = _sigmoid(X @ w + b)
        s = np.maximum(p * (1.0 - p), 1e-10)
        xb = np.hstack([X, np.ones((n, 1))])
        hess = (xb.T * s) @ xb / n
        hess[:n_features, :n_features] += np.eye(n_features) / (l2_c * n)
        grad = np.append(grad_w, grad_b)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        scale = 1.0
        for _ in range(60):
            w_new = w - scale * step[:n_features]
            b_new = b - scale * step[n_features]
            new_loss, new_gw, new_gb = logreg_objective(w_new, b_new, X, y, l2_c)
            if new_loss <= loss:
                break
            scale *= 0.5
        w, b, loss, grad_w, grad_b = w_new, b_new, new_loss, new_gw, new_gb
    if not (np.all(np.isfinite(w)) and math.isfinite(b)):
        raise NonFinite("logistic regression diverged")
    return LinearModel(weights=w, bias=b, regularization=l2_c)


# ---------------------------------------------------------------------------
# Multinomial naive Bayes
# ---------------------------------------------------------------------------

def train_nb(data: LabeledDataset) -> NaiveBayesModel:
    """Class priors plus add-one-smoothed likelihoods over feature mass.
    Negative entries are clamped to zero first."""
    X = np.maximum(np.asarray(data.matrix, dtype=np.float64), 0.0)
    if not np.all(np.isfinite(X)):
        raise NonFinite("training matrix contains non-finite values")
    y = data.y01()
    n, n_features = X.shape
    priors = np.empty(2)
    log_prob = np.empty((2, n_features))
    for cls in (0, 1):
        mask = y == cls
        count = int(np.sum(mask))
        priors[cls] = math.log(count / n) if count else -math.inf
        mass = X[mask].sum(axis=0) + 1.0
        log_prob[cls] = np.log(mass) - math.log(float(mass.sum()))
    return NaiveBayesModel(class_log_prior=priors, feature_log_prob=log_prob)


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict_proba_matrix(model, X: np.ndarray) -> np.ndarray:
    """P(PSM) per row."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    width = _model_width(model)
    if X.shape[1] != width:
        raise WidthMismatch(f"expected {width} features, got {X.shape[1]}")
    if isinstance(model, TreeEnsembleModel):
        out = np.zeros(X.shape[0])
        if model.kind == "gbdt":
            out += model.base_score
            for tree in model.trees:
                _accumulate_tree(
                    tree.feature, tree.threshold, tree.left, tree.right,
                    tree.value, X, out, model.learning_rate,
                )
            return _sigmoid(out)
        scale = 1.0 / len(model.trees)
        for tree in model.trees:
            _accumulate_tree(
                tree.feature, tree.threshold, tree.left, tree.right,
                tree.value, X, out, scale,
            )
        return out
    if isinstance(model, LinearModel):
        return _sigmoid(X @ model.weights + model.bias)
    if isinstance(model, NaiveBayesModel):
        scores = np.maximum(X, 0.0) @ model.feature_log_prob.T + model.class_log_prior
        diff = scores[:, 1] - scores[:, 0]
        return _sigmoid(diff)
    raise InvalidParams(f"unknown model type {type(model).__name__}")


def predict_proba(model, features) -> float:
    """P(PSM) for one feature vector."""
    return float(predict_proba_matrix(model, np.asarray(features, dtype=np.float64))[0])


def predict_labels(model, X: np.ndarray) -> np.ndarray:
    """Hard labels at the 0.5 threshold; ties go to NORMAL."""
    proba = predict_proba_matrix(model, X)
    return np.where(proba > 0.5, PSM, NORMAL)


def _model_width(model) -> int:
    if isinstance(model, TreeEnsembleModel):
        return model.n_features
    if isinstance(model, LinearModel):
        return len(model.weights)
    if isinstance(model, NaiveBayesModel):
        return model.feature_log_prob.shape[1]
    raise InvalidParams(f"unknown model type {type(model).__name__}")


# ---------------------------------------------------------------------------
# Artifact I/O
# ---------------------------------------------------------------------------

def save_model(model, path) -> None:
    if isinstance(model, TreeEnsembleModel):
        payload = {
            "kind": model.kind,
            "learning_rate": model.learning_rate,
            "base_score": model.base_score,
            "seed": model.seed,
            "n_features": model.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
        }
    elif isinstance(model, LinearModel):
        payload = {
            "kind": "lr",
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "regularization": model.regularization,
        }
    elif isinstance(model, NaiveBayesModel):
        payload = {
            "kind": "nb",
            "class_log_prior": model.class_log_prior.tolist(),
            "feature_log_prob": model.feature_log_prob.tolist(),
        }
    else:
        raise InvalidParams(f"unknown model type {type(model).__name__}")
    text = MODEL_MAGIC + "\n" + json.dumps(payload, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text, encoding="utf-8")


def load_model(path):
    text = Path(path).read_text(encoding="utf-8")
    magic, _, body = text.partition("\n")
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"expected magic {MODEL_MAGIC!r}, found {magic!r}")
    payload = json.loads(body)
    kind = payload.get("kind")
    if kind in ("dt", "rf", "gbdt"):
        trees = [
            Tree(
                feature=np.asarray(t["feature"], np.int32),
                threshold=np.asarray(t["threshold"], np.float64),
                left=np.asarray(t["left"], np.int32),
                right=np.asarray(t["right"], np.int32),
                value=np.asarray(t["value"], np.float64),
            )
            for t in payload["trees"]
        ]
        return TreeEnsembleModel(
            kind=kind,
            trees=trees,
            learning_rate=payload["learning_rate"],
            base_score=payload["base_score"],
            seed=payload["seed"],
            n_features=payload["n_features"],
        )
    if kind == "lr":
        return LinearModel(
            weights=np.asarray(payload["weights"], np.float64),
            bias=payload["bias"],
            regularization=payload["regularization"],
        )
    if kind == "nb":
        return NaiveBayesModel(
            class_log_prior=np.asarray(payload["class_log_prior"], np.float64),
            feature_log_prob=np.asarray(payload["feature_log_prob"], np.float64),
        )
    raise ModelFormatError(f"unknown model kind {kind!r}")
