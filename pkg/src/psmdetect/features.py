"""Per-user feature extraction and fusion into the fixed 111-wide vector.

Segment layout, in order:

    causal 4 | profile 10 | website 5 | domain 5 | topic 25 | quote 1 |
    complexity 1 | readability 1 | unigram 20 | bigram 20 | expertise 8 |
    tweet 6 | hashtag 5

The three report groups are column ranges over that layout: user features
are causal+profile (width 14), source features run from website through
expertise (86), content features are tweet+hashtag (11).

Website and domain blocks average over URL *posts* (a URL shared twice
counts twice); the content blocks average over the user's distinct URL
documents that have at least one word of content. Users with no URLs, or
none with usable content, get zeros for the affected source blocks.

The topic model and TF-IDF vocabulary are fitted objects; FeatureExtractor
refits them per training split so cross-validation never leaks test-fold
text into them. Everything else is fitting-free and computed once.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from urllib.parse import urlsplit

import numpy as np

from .cascade import build_cascades
from .causal import CausalScores, causal_feature_block, causal_scores
from .config import PipelineConfig, derive_seed
from .corpus import Corpus, Label, TweetRecord, UrlDocument, UserProfile
from .errors import LayoutMismatch, NoTweets
from .textproc import (
    TfidfVocabulary,
    TokenizedDoc,
    build_tfidf_vocab,
    complexity,
    content_terms,
    has_quote,
    load_stopwords,
    reading_ease,
    tfidf_features,
    tokenize,
)
from .topics import TopicModel, infer_distribution, topic_feature_block, train_lda

logger = logging.getLogger(__name__)

LAYOUT = (
    ("causal", 4),
    ("profile", 10),
    ("website", 5),
    ("domain", 5),
    ("topic", 25),
    ("quote", 1),
    ("complexity", 1),
    ("readability", 1),
    ("unigram", 20),
    ("bigram", 20),
    ("expertise", 8),
    ("tweet", 6),
    ("hashtag", 5),
)
N_FEATURES = sum(width for _, width in LAYOUT)

_PROFILE_COLUMNS = (
    "statuses_count",
    "followers_count",
    "friends_count",
    "favorites_count",
    "listed_count",
    "default_profile",
    "geo_enabled",
    "uses_background_image",
    "verified",
    "protected",
)
_TWEET_COLUMNS = (
    "retweet_count",
    "reply_count",
    "favorite_count",
    "num_hashtags",
    "num_urls",
    "num_mentions",
)


def segment_offsets() -> dict[str, tuple[int, int]]:
    """Segment name -> (start, stop) column range."""
    offsets = {}
    pos = 0
    for name, width in LAYOUT:
        offsets[name] = (pos, pos + width)
        pos += width
    return offsets


_OFFSETS = segment_offsets()

FEATURE_GROUPS = {
    "user": (0, _OFFSETS["profile"][1]),
    "source": (_OFFSETS["website"][0], _OFFSETS["expertise"][1]),
    "content": (_OFFSETS["tweet"][0], N_FEATURES),
}


def canonical_columns() -> list[str]:
    cols = ["causal.kandm", "causal.rel", "causal.nb", "causal.wnb"]
    cols += [f"profile.{name}" for name in _PROFILE_COLUMNS]
    cols += [f"src.website.{i:02d}" for i in range(5)]
    cols += ["src.domain.http", "src.domain.https", "src.domain.gov",
             "src.domain.co", "src.domain.com"]
    cols += [f"src.topic.{i:02d}" for i in range(25)]
    cols += ["src.has_quote", "src.complexity", "src.readability"]
    cols += [f"src.unigram.{i:02d}" for i in range(20)]
    cols += [f"src.bigram.{i:02d}" for i in range(20)]
    cols += [f"src.expertise.{i:02d}" for i in range(8)]
    cols += [f"tweet.{name}" for name in _TWEET_COLUMNS]
    cols += [f"hashtag.{i:02d}" for i in range(5)]
    assert len(cols) == N_FEATURES
    return cols


@dataclass
class FeatureVector:
    user_id: str
    values: np.ndarray

    def segment(self, name: str) -> np.ndarray:
        start, stop = _OFFSETS[name]
        return self.values[start:stop]


# ---------------------------------------------------------------------------
# Individual blocks
# ---------------------------------------------------------------------------

def profile_block(profile: UserProfile) -> list[float]:
    return [
        float(profile.statuses_count),
        float(profile.followers_count),
        float(profile.friends_count),
        float(profile.favorites_count),
        float(profile.listed_count),
        float(profile.default_profile),
        float(profile.geo_enabled),
        float(profile.profile_uses_background_image),
        float(profile.verified),
        float(profile.protected),
    ]


def _host_of(url: str) -> str | None:
    try:
        parts = urlsplit(url)
    except ValueError:
        return None
    return parts.hostname


def _scheme_of(url: str) -> str | None:
    try:
        parts = urlsplit(url)
    except ValueError:
        return None
    return parts.scheme or None


def _matches_registered_domain(host: str, domain: str) -> bool:
    return host == domain or host.endswith("." + domain)


def website_block(user_urls: list[str], flagged: list[str]) -> list[float]:
    """Fraction of the user's URL posts landing on each flagged site."""
    if not user_urls:
        return [0.0] * len(flagged)
    counts = [0] * len(flagged)
    for url in user_urls:
        host = _host_of(url)
        if not host:
            continue
        for d, domain in enumerate(flagged):
            if domain and _matches_registered_domain(host, domain):
                counts[d] += 1
    return [c / len(user_urls) for c in counts]


def domain_block(user_urls: list[str]) -> list[float]:
    """Mean indicator quintuple [http, https, .gov, .co, .com] over the
    user's URL posts; unparsable URLs contribute zeros with a warning."""
    if not user_urls:
        return [0.0] * 5
    totals = np.zeros(5)
    for url in user_urls:
        host = _host_of(url)
        scheme = _scheme_of(url)
        if not host or not scheme:
            logger.warning("unparsable url %r; counting zero indicators", url)
            continue
        last_label = host.rsplit(".", 1)[-1]
        totals += [
            scheme == "http",
            scheme == "https",
            last_label == "gov",
            last_label == "co",
            last_label == "com",
        ]
    return [float(v) for v in totals / len(user_urls)]


@dataclass
class ExpertiseMatchers:
    patterns: list[list[re.Pattern]]  # one list of keyword patterns per category

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "ExpertiseMatchers":
        patterns = []
        for category in config.expertise_categories:
            pats = []
            for keyword in category.keywords:
                kw = keyword.strip().lower()
                if kw:
                    pats.append(re.compile(r"(?<!\w)" + re.escape(kw) + r"(?!\w)"))
            patterns.append(pats)
        return cls(patterns)

    def counts(self, lowered_text: str) -> list[int]:
        return [
            sum(len(p.findall(lowered_text)) for p in pats) for pats in self.patterns
        ]


@dataclass
class DocFeatures:
    """Fitting-free per-document features, computed once per URL."""

    terms: list[str]  # stop-word-filtered tokens, shared by LDA and TF-IDF
    tokenized: TokenizedDoc
    quote: float
    complexity: float
    readability: float
    expertise: list[float]
    word_count: int


def _doc_features(
    doc: UrlDocument,
    stopwords: frozenset[str],
    matchers: ExpertiseMatchers,
    binary_expertise: bool,
    lexicon_path: str | None,
) -> DocFeatures | None:
    """None when the document has no words to analyze."""
    if not doc.content:
        return None
    tokenized = tokenize(doc.content, lexicon_path)
    words = tokenized.words()
    if not words:
        return None
    counts = matchers.counts(doc.content.lower())
    if binary_expertise:
        expertise = [1.0 if c else 0.0 for c in counts]
    else:
        expertise = [c / len(words) for c in counts]
    return DocFeatures(
        terms=content_terms(tokenized, stopwords),
        tokenized=tokenized,
        quote=float(has_quote(doc.content)),
        complexity=complexity(tokenized),
        readability=reading_ease(tokenized),
        expertise=expertise,
        word_count=len(words),
    )


def content_source_blocks(
    user_docs: list[UrlDocument],
    model: TopicModel,
    vocab: TfidfVocabulary,
    config: PipelineConfig,
) -> tuple[list[float], ...]:
    """(topics 25, quote 1, complexity 1, readability 1, unigram 20,
    bigram 20, expertise 8) averaged over the user's usable documents."""
    stopwords = load_stopwords(config.stopwords_path)
    matchers = ExpertiseMatchers.from_config(config)
    feats = []
    for doc in user_docs:
        df = _doc_features(doc, stopwords, matchers, config.expertise_binary, config.lexicon_path)
        if df is not None:
            feats.append((doc.url, df))
    if not feats:
        return ([0.0] * model.k, [0.0], [0.0], [0.0], [0.0] * 20, [0.0] * 20, [0.0] * 8)
    distributions = [
        infer_distribution(
            model,
            df.terms,
            config.lda.fold_in_iterations,
            derive_seed(config.seed, "foldin", url),
        )
        for url, df in feats
    ]
    tf = np.mean([tfidf_features(df.tokenized, vocab, stopwords) for _, df in feats], axis=0)
    return (
        topic_feature_block(distributions, model.k),
        [float(np.mean([df.quote for _, df in feats]))],
        [float(np.mean([df.complexity for _, df in feats]))],
        [float(np.mean([df.readability for _, df in feats]))],
        [float(v) for v in tf[:20]],
        [float(v) for v in tf[20:]],
        [float(v) for v in np.mean([df.expertise for _, df in feats], axis=0)],
    )


def tweet_block(tweets: list[TweetRecord]) -> list[float]:
    """Mean per-tweet [retweets, replies, favorites, #hashtags, #urls,
    #mentions]."""
    if not tweets:
        raise NoTweets("tweet features need at least one tweet")
    totals = np.zeros(6)
    for t in tweets:
        totals += [
            t.retweet_count,
            t.reply_count,
            t.favorite_count,
            len(t.hashtags),
            len(t.urls),
            t.mention_count,
        ]
    return [float(v) for v in totals / len(tweets)]


def hashtag_block(tweets: list[TweetRecord], suspicious: list[str]) -> list[float]:
    """Fraction of the user's tweets carrying each suspicious hashtag
    (presence per tweet, duplicates within a tweet count once)."""
    if not tweets:
        return [0.0] * len(suspicious)
    counts = [0] * len(suspicious)
    for t in tweets:
        tags = set(t.hashtags)
        for h, tag in enumerate(suspicious):
            if tag and tag in tags:
                counts[h] += 1
    return [c / len(tweets) for c in counts]


def fuse(user_id: str, *blocks: list[float]) -> FeatureVector:
    """Concatenate the thirteen blocks in layout order into one vector."""
    if len(blocks) != len(LAYOUT):
        raise LayoutMismatch(f"expected {len(LAYOUT)} blocks, got {len(blocks)}")
    for block, (name, width) in zip(blocks, LAYOUT):
        if len(block) != width:
            raise LayoutMismatch(f"block {name!r} must have width {width}, got {len(block)}")
    values = np.concatenate([np.asarray(b, dtype=np.float64) for b in blocks])
    if not np.all(np.isfinite(values)):
        raise LayoutMismatch(f"non-finite feature values for user {user_id!r}")
    return FeatureVector(user_id=user_id, values=values)


# ---------------------------------------------------------------------------
# Corpus-level extraction with per-split text models
# ---------------------------------------------------------------------------

@dataclass
class TextModels:
    topic_model: TopicModel
    vocab: TfidfVocabulary


class FeatureExtractor:
    """Caches everything fitting-free about a corpus and rebuilds the two
    fitted text models (LDA, TF-IDF vocabulary) for any training user set.

    Rows cover every user with at least one tweet, in sorted user order.
    """

    def __init__(self, corpus: Corpus, config: PipelineConfig | None = None):
        self.corpus = corpus
        self.config = config or corpus.config
        self.stopwords = load_stopwords(self.config.stopwords_path)
        self.cascades = build_cascades(corpus, self.config.theta)
        self.causal = causal_scores(self.cascades, self.config.causal_alpha)

        matchers = ExpertiseMatchers.from_config(self.config)
        self.doc_features: dict[str, DocFeatures] = {}
        for url in sorted(corpus.url_documents):
            df = _doc_features(
                corpus.url_documents[url],
                self.stopwords,
                matchers,
                self.config.expertise_binary,
                self.config.lexicon_path,
            )
            if df is not None:
                self.doc_features[url] = df

        self.tweets_by_user: dict[str, list[TweetRecord]] = {}
        for tweet in corpus.tweets:
            self.tweets_by_user.setdefault(tweet.user_id, []).append(tweet)
        self.user_ids: list[str] = sorted(self.tweets_by_user)

        self.url_posts: dict[str, list[str]] = {}
        self.content_urls: dict[str, list[str]] = {}
        for uid in self.user_ids:
            posts = [u for t in self.tweets_by_user[uid] for u in t.urls]
            self.url_posts[uid] = posts
            seen: list[str] = []
            for u in posts:
                if u in self.doc_features and u not in seen:
                    seen.append(u)
            self.content_urls[uid] = seen

        self._static = self._static_matrix()

    # -- fitting-free columns ------------------------------------------------

    def _static_matrix(self) -> np.ndarray:
        cfg = self.config
        rows = []
        for uid in self.user_ids:
            docs = [self.doc_features[u] for u in self.content_urls[uid]]
            if docs:
                quote = [float(np.mean([d.quote for d in docs]))]
                cmplx = [float(np.mean([d.complexity for d in docs]))]
                read = [float(np.mean([d.readability for d in docs]))]
                expertise = [float(v) for v in np.mean([d.expertise for d in docs], axis=0)]
            else:
                quote, cmplx, read, expertise = [0.0], [0.0], [0.0], [0.0] * 8
            rows.append(
                np.concatenate(
                    [
                        causal_feature_block(self.causal.get(uid, CausalScores(uid))),
                        profile_block(self.corpus.profiles[uid]),
                        website_block(self.url_posts[uid], cfg.flagged_websites),
                        domain_block(self.url_posts[uid]),
                        quote,
                        cmplx,
                        read,
                        expertise,
                        tweet_block(self.tweets_by_user[uid]),
                        hashtag_block(self.tweets_by_user[uid], cfg.suspicious_hashtags),
                    ]
                )
            )
        return np.asarray(rows)

    # -- fitted columns ------------------------------------------------------

    def training_doc_urls(self, train_users: set[str]) -> list[str]:
        """Documents shared by at least one training-split user."""
        return [
            url
            for url in self.doc_features
            if self.corpus.url_documents[url].sharers & train_users
        ]

    def fit_text_models(self, train_users: set[str], seed_tag: object = "all") -> TextModels:
        cfg = self.config
        urls = self.training_doc_urls(train_users)
        train_tokenized = [self.doc_features[u].tokenized for u in urls]
        train_terms = [self.doc_features[u].terms for u in urls]
        vocab = build_tfidf_vocab(train_tokenized, self.stopwords, cfg.tfidf.top_n)
        topic_model = train_lda(
            train_terms,
            k=cfg.lda.k,
            alpha=cfg.lda.alpha,
            beta=cfg.lda.beta,
            iterations=cfg.lda.iterations,
            seed=derive_seed(cfg.seed, "lda", seed_tag),
            min_word_count=cfg.lda.min_word_count,
        )
        return TextModels(topic_model=topic_model, vocab=vocab)

    def matrix(self, models: TextModels, user_ids: list[str] | None = None) -> np.ndarray:
        """Full 111-column matrix for the given users (default: all)."""
        cfg = self.config
        theta_by_url = {}
        tfidf_by_url = {}
        for url, df in self.doc_features.items():
            theta_by_url[url] = infer_distribution(
                models.topic_model,
                df.terms,
                cfg.lda.fold_in_iterations,
                derive_seed(cfg.seed, "foldin", url),
            ).theta
            tfidf_by_url[url] = np.asarray(
                tfidf_features(df.tokenized, models.vocab, self.stopwords)
            )

        if user_ids is None:
            user_ids = self.user_ids
        index = {uid: i for i, uid in enumerate(self.user_ids)}
        k = models.topic_model.k
        out = np.empty((len(user_ids), N_FEATURES))
        for r, uid in enumerate(user_ids):
            static = self._static[index[uid]]
            urls = self.content_urls[uid]
            if urls:
                theta = np.mean([theta_by_url[u] for u in urls], axis=0)
                tf = np.mean([tfidf_by_url[u] for u in urls], axis=0)
            else:
                theta = np.zeros(k)
                tf = np.zeros(40)
            out[r, 0:24] = static[0:24]
            out[r, 24:49] = theta
            out[r, 49:52] = static[24:27]
            out[r, 52:92] = tf
            out[r, 92:100] = static[27:35]
            out[r, 100:111] = static[35:46]
        return out

    # -- labels ----------------------------------------------------------------

    def labeled_users(self) -> tuple[list[str], np.ndarray]:
        uids = [
            uid
            for uid in self.user_ids
            if self.corpus.profiles[uid].label is not Label.UNLABELED
        ]
        labels = np.array(
            [self.corpus.profiles[uid].label.value for uid in uids], dtype=object
        )
        return uids, labels

    def users_with_content(self) -> set[str]:
        return {uid for uid in self.user_ids if self.content_urls[uid]}

    def content_stats(self) -> np.ndarray:
        """(n_users, 3) per-user [has_quote, complexity, readability]
        means; fitting-free, aligned with user_ids."""
        return self._static[:, 24:27]

    def feature_vectors(self, models: TextModels) -> list[FeatureVector]:
        matrix = self.matrix(models)
        return [
            FeatureVector(uid, matrix[i]) for i, uid in enumerate(self.user_ids)
        ]
