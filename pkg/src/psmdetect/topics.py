"""Topic modeling over URL page text: LDA via collapsed Gibbs sampling.

Training runs the standard collapsed sampler,

    P(z = t | rest)  ∝  (n_dt + alpha) * (n_tw + beta) / (n_t + V*beta),

keeping the counts from the final sweep as the point estimate. Inference
for a new document is Gibbs fold-in: the topic-word counts stay frozen and
only the document's own topic counts move, giving

    theta_t = (n_dt + alpha) / (n_in_vocab + k*alpha).

All randomness comes from a seeded generator feeding pre-drawn uniforms
into the compiled sampler, so runs are bit-reproducible. The inner loops
are sequential by nature; parallelism belongs at the per-model level.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import EmptyCorpus, ModelFormatError
from .textproc import TokenizedDoc

logger = logging.getLogger(__name__)

MODEL_MAGIC = "LDAMODEL/1"


@dataclass
class TopicModel:
    k: int
    vocab: list[str]
    topic_word_counts: np.ndarray  # (k, |vocab|)
    topic_totals: np.ndarray  # (k,)
    alpha: float
    beta: float
    seed: int
    # joint log-likelihood of the training assignment, before and after
    # sampling; kept for the monotone-trend check
    ll_start: float = 0.0
    ll_end: float = 0.0
    word_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.word_index:
            self.word_index = {w: i for i, w in enumerate(self.vocab)}


@dataclass
class TopicDistribution:
    theta: np.ndarray

    def as_list(self) -> list[float]:
        return [float(v) for v in self.theta]


def _term_list(doc) -> list[str]:
    if isinstance(doc, TokenizedDoc):
        return doc.words()
    return list(doc)


@njit(cache=True, nogil=True)
def _gibbs_train_pass(doc_ids, word_ids, z, ndk, nkw, nk, alpha, beta, uniforms):
    k = nkw.shape[0]
    vbeta = nkw.shape[1] * beta
    cum = np.empty(k)
    for i in range(word_ids.size):
        d = doc_ids[i]
        w = word_ids[i]
        t = z[i]
        ndk[d, t] -= 1
        nkw[t, w] -= 1
        nk[t] -= 1
        acc = 0.0
        for tt in range(k):
            acc += (ndk[d, tt] + alpha) * (nkw[tt, w] + beta) / (nk[tt] + vbeta)
            cum[tt] = acc
        u = uniforms[i] * acc
        t_new = k - 1
        for tt in range(k):
            if u < cum[tt]:
                t_new = tt
                break
        ndk[d, t_new] += 1
        nkw[t_new, w] += 1
        nk[t_new] += 1
        z[i] = t_new


@njit(cache=True, nogil=True)
def _gibbs_fold_pass(word_ids, z, nd, nkw, nk, alpha, beta, uniforms):
    # nkw and nk are read-only here: fold-in never touches the model.
    k = nkw.shape[0]
    vbeta = nkw.shape[1] * beta
    cum = np.empty(k)
    for i in range(word_ids.size):
        w = word_ids[i]
        t = z[i]
        nd[t] -= 1
        acc = 0.0
        for tt in range(k):
            acc += (nd[tt] + alpha) * (nkw[tt, w] + beta) / (nk[tt] + vbeta)
            cum[tt] = acc
        u = uniforms[i] * acc
        t_new = k - 1
        for tt in range(k):
            if u < cum[tt]:
                t_new = tt
                break
        nd[t_new] += 1
        z[i] = t_new


def _joint_log_likelihood(ndk, nkw, nk, doc_lengths, alpha, beta) -> float:
    k, v = nkw.shape
    d = ndk.shape[0]
    ll = k * (math.lgamma(v * beta) - v * math.lgamma(beta))
    for t in range(k):
        row = nkw[t]
        for w in range(v):
            ll += math.lgamma(row[w] + beta)
        ll -= math.lgamma(nk[t] + v * beta)
    ll += d * (math.lgamma(k * alpha) - k * math.lgamma(alpha))
    for i in range(d):
        row = ndk[i]
        for t in range(k):
            ll += math.lgamma(row[t] + alpha)
        ll -= math.lgamma(doc_lengths[i] + k * alpha)
    return ll


def train_lda(
    train_docs: list,
    k: int = 25,
    alpha: float = 2.0,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
    min_word_count: int = 2,
) -> TopicModel:
    """Train on tokenized documents (stop words already removed).

    The vocabulary keeps terms whose total corpus count reaches
    min_word_count; out-of-vocabulary tokens are ignored.
    """
    term_lists = [_term_list(doc) for doc in train_docs]
    if not term_lists:
        raise EmptyCorpus("LDA training needs at least one document")
    if len(term_lists) < k:
        logger.warning(
            "training %d topics on only %d documents; topics may be unstable",
            k, len(term_lists),
        )
    counts: dict[str, int] = {}
    for terms in term_lists:
        for term in terms:
            counts[term] = counts.get(term, 0) + 1
    vocab = sorted(t for t, c in counts.items() if c >= min_word_count)
    if not vocab:
        raise EmptyCorpus(
            f"no term reaches min_word_count={min_word_count}; vocabulary is empty"
        )
    word_index = {w: i for i, w in enumerate(vocab)}

    doc_ids = []
    word_ids = []
    for d, terms in enumerate(term_lists):
        for term in terms:
            idx = word_index.get(term)
            if idx is not None:
                doc_ids.append(d)
                word_ids.append(idx)
    doc_ids = np.asarray(doc_ids, dtype=np.int32)
    word_ids = np.asarray(word_ids, dtype=np.int32)

    n_docs = len(term_lists)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, word_ids.size, dtype=np.int32)
    ndk = np.zeros((n_docs, k), dtype=np.int32)
    nkw = np.zeros((k, len(vocab)), dtype=np.int32)
    nk = np.zeros(k, dtype=np.int32)
    np.add.at(ndk, (doc_ids, z), 1)
    np.add.at(nkw, (z, word_ids), 1)
    np.add.at(nk, z, 1)

    doc_lengths = ndk.sum(axis=1)
    ll_start = _joint_log_likelihood(ndk, nkw, nk, doc_lengths, alpha, beta)
    for _ in range(iterations):
        uniforms = rng.random(word_ids.size)
        _gibbs_train_pass(doc_ids, word_ids, z, ndk, nkw, nk, alpha, beta, uniforms)
    ll_end = _joint_log_likelihood(ndk, nkw, nk, doc_lengths, alpha, beta)

    return TopicModel(
        k=k,
        vocab=vocab,
        topic_word_counts=nkw,
        topic_totals=nk,
        alpha=alpha,
        beta=beta,
        seed=seed,
        ll_start=ll_start,
        ll_end=ll_end,
    )


def infer_distribution(
    model: TopicModel,
    doc,
    fold_in_iterations: int = 50,
    seed: int = 0,
) -> TopicDistribution:
    """Document-topic distribution by Gibbs fold-in; the model is not
    mutated. A document with no in-vocabulary token gets the uniform
    distribution."""
    word_ids = np.asarray(
        [model.word_index[t] for t in _term_list(doc) if t in model.word_index],
        dtype=np.int32,
    )
    k = model.k
    if word_ids.size == 0:
        return TopicDistribution(theta=np.full(k, 1.0 / k))

    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, word_ids.size, dtype=np.int32)
    nd = np.zeros(k, dtype=np.int32)
    np.add.at(nd, z, 1)
    nkw = np.ascontiguousarray(model.topic_word_counts, dtype=np.int32)
    nk = np.ascontiguousarray(model.topic_totals, dtype=np.int32)
    for _ in range(fold_in_iterations):
        uniforms = rng.random(word_ids.size)
        _gibbs_fold_pass(word_ids, z, nd, nkw, nk, model.alpha, model.beta, uniforms)
    theta = (nd + model.alpha) / (word_ids.size + k * model.alpha)
    return TopicDistribution(theta=theta)


def topic_feature_block(distributions: list[TopicDistribution], k: int) -> list[float]:
    """Elementwise mean of document-topic distributions; zeros when the
    user shared no contentful URL."""
    if not distributions:
        return [0.0] * k
    total = np.zeros(k)
    for dist in distributions:
        total += dist.theta
    return [float(v) for v in total / len(distributions)]


def save_topic_model(model: TopicModel, path) -> None:
    payload = {
        "k": model.k,
        "vocab": model.vocab,
        "topic_word_counts": model.topic_word_counts.tolist(),
        "topic_totals": model.topic_totals.tolist(),
        "alpha": model.alpha,
        "beta": model.beta,
        "seed": model.seed,
    }
    text = MODEL_MAGIC + "\n" + json.dumps(payload, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text, encoding="utf-8")


def load_topic_model(path) -> TopicModel:
    text = Path(path).read_text(encoding="utf-8")
    magic, _, body = text.partition("\n")
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"expected magic {MODEL_MAGIC!r}, found {magic!r}")
    payload = json.loads(body)
    nkw = np.asarray(payload["topic_word_counts"], dtype=np.int32)
    nk = np.asarray(payload["topic_totals"], dtype=np.int32)
    if nkw.shape != (payload["k"], len(payload["vocab"])) or not np.array_equal(
        nkw.sum(axis=1), nk
    ):
        raise ModelFormatError("inconsistent topic model payload")
    return TopicModel(
        k=payload["k"],
        vocab=list(payload["vocab"]),
        topic_word_counts=nkw,
        topic_totals=nk,
        alpha=payload["alpha"],
        beta=payload["beta"],
        seed=payload["seed"],
    )
