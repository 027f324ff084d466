"""Corpus data model, line-delimited JSON I/O, and the synthetic generator.

The corpus is three JSONL files (tweets, profiles, URL contents). Loading
validates referential integrity, drops duplicated (user, message, time)
actions, and substitutes empty text for URLs whose content is missing.

The synthetic generator plants class signal on every channel the feature
extractor reads: PSM users dominate the early slots of viral cascades,
share flagged-site URLs and suspicious hashtags more often, and their URL
contents come from a distinct topic vocabulary written in a short-word,
short-sentence style (higher reading ease, more varied part-of-speech mix).
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlsplit

import numpy as np

from .config import PipelineConfig, default_config
from .errors import InvalidParams, MalformedRecord, MissingProfile

logger = logging.getLogger(__name__)


class Label(enum.Enum):
    PSM = "psm"
    NORMAL = "normal"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class ActionRecord:
    """One (user, message, time) posting/retweeting event."""

    user_id: str
    message_id: str
    time: int


@dataclass
class TweetRecord:
    tweet_id: str
    user_id: str
    message_id: str
    time: int
    text: str
    hashtags: list[str]
    urls: list[str]
    retweet_count: int
    reply_count: int
    favorite_count: int
    mention_count: int

    def action(self) -> ActionRecord:
        return ActionRecord(self.user_id, self.message_id, self.time)


@dataclass
class UserProfile:
    user_id: str
    statuses_count: int
    followers_count: int
    friends_count: int
    favorites_count: int
    listed_count: int
    default_profile: int
    geo_enabled: int
    profile_uses_background_image: int
    verified: int
    protected: int
    label: Label


@dataclass
class UrlDocument:
    url: str
    content: str
    sharers: set[str] = field(default_factory=set)


@dataclass
class Corpus:
    tweets: list[TweetRecord]
    profiles: dict[str, UserProfile]
    url_documents: dict[str, UrlDocument]
    config: PipelineConfig

    def action_log(self) -> list[ActionRecord]:
        """Deduplicated actions in (time, user, tweet) order."""
        return [t.action() for t in self.tweets]

    def user_ids(self) -> list[str]:
        return sorted(self.profiles)


TWEET_KEYS = (
    "tweet_id",
    "user_id",
    "message_id",
    "time",
    "text",
    "hashtags",
    "urls",
    "retweet_count",
    "reply_count",
    "favorite_count",
    "mention_count",
)
PROFILE_KEYS = (
    "user_id",
    "statuses_count",
    "followers_count",
    "friends_count",
    "favorites_count",
    "listed_count",
    "default_profile",
    "geo_enabled",
    "profile_uses_background_image",
    "verified",
    "protected",
    "label",
)
URL_KEYS = ("url", "content")

_COUNT_FIELDS = ("retweet_count", "reply_count", "favorite_count", "mention_count")
_PROFILE_COUNT_FIELDS = (
    "statuses_count",
    "followers_count",
    "friends_count",
    "favorites_count",
    "listed_count",
)
_PROFILE_FLAG_FIELDS = (
    "default_profile",
    "geo_enabled",
    "profile_uses_background_image",
    "verified",
    "protected",
)


def _iter_jsonl(path, expected_keys):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(path, line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise MalformedRecord(path, line_no, "record is not an object")
            if set(obj) != set(expected_keys):
                missing = set(expected_keys) - set(obj)
                extra = set(obj) - set(expected_keys)
                raise MalformedRecord(
                    path, line_no, f"bad keys (missing={sorted(missing)}, extra={sorted(extra)})"
                )
            yield line_no, obj


def _as_count(path, line_no, name, value):
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise MalformedRecord(path, line_no, f"{name} must be a non-negative integer")
    return value


def _as_flag(path, line_no, name, value):
    if isinstance(value, bool):
        return int(value)
    if value in (0, 1):
        return value
    raise MalformedRecord(path, line_no, f"{name} must be 0 or 1")


def normalize_hashtag(tag: str) -> str:
    return tag.lstrip("#").lower()


def load_corpus(tweets_path, profiles_path, urlcontent_path, config: PipelineConfig) -> Corpus:
    """Load and validate the three-file corpus.

    Raises MalformedRecord / MissingProfile on hard errors; missing URL
    content and duplicated actions are downgraded to logged warnings.
    """
    profiles: dict[str, UserProfile] = {}
    for line_no, obj in _iter_jsonl(profiles_path, PROFILE_KEYS):
        uid = obj["user_id"]
        if not isinstance(uid, str) or not uid:
            raise MalformedRecord(profiles_path, line_no, "user_id must be a non-empty string")
        if uid in profiles:
            raise MalformedRecord(profiles_path, line_no, f"duplicate profile for user {uid!r}")
        raw_label = obj["label"]
        if raw_label is None:
            label = Label.UNLABELED
        elif raw_label in ("psm", "normal"):
            label = Label(raw_label)
        else:
            raise MalformedRecord(profiles_path, line_no, f"unknown label {raw_label!r}")
        kwargs = {"user_id": uid, "label": label}
        for name in _PROFILE_COUNT_FIELDS:
            kwargs[name] = _as_count(profiles_path, line_no, name, obj[name])
        for name in _PROFILE_FLAG_FIELDS:
            kwargs[name] = _as_flag(profiles_path, line_no, name, obj[name])
        profiles[uid] = UserProfile(**kwargs)

    contents: dict[str, str] = {}
    for line_no, obj in _iter_jsonl(urlcontent_path, URL_KEYS):
        url, content = obj["url"], obj["content"]
        if not isinstance(url, str) or not isinstance(content, str):
            raise MalformedRecord(urlcontent_path, line_no, "url and content must be strings")
        parts = urlsplit(url)
        if not parts.scheme or not parts.hostname:
            raise MalformedRecord(urlcontent_path, line_no, f"url {url!r} lacks scheme or host")
        if url in contents:
            raise MalformedRecord(urlcontent_path, line_no, f"duplicate url {url!r}")
        contents[url] = content

    tweets: list[TweetRecord] = []
    seen_actions: set[tuple[str, str, int]] = set()
    for line_no, obj in _iter_jsonl(tweets_path, TWEET_KEYS):
        for name in ("tweet_id", "user_id", "message_id", "text"):
            if not isinstance(obj[name], str):
                raise MalformedRecord(tweets_path, line_no, f"{name} must be a string")
        time = _as_count(tweets_path, line_no, "time", obj["time"])
        for name in ("hashtags", "urls"):
            if not isinstance(obj[name], list) or any(
                not isinstance(v, str) for v in obj[name]
            ):
                raise MalformedRecord(tweets_path, line_no, f"{name} must be a list of strings")
        if obj["user_id"] not in profiles:
            raise MissingProfile(obj["user_id"])
        key = (obj["user_id"], obj["message_id"], time)
        if key in seen_actions:
            logger.warning(
                "%s:%d: duplicate action %r dropped", tweets_path, line_no, key
            )
            continue
        seen_actions.add(key)
        tweets.append(
            TweetRecord(
                tweet_id=obj["tweet_id"],
                user_id=obj["user_id"],
                message_id=obj["message_id"],
                time=time,
                text=obj["text"],
                hashtags=[normalize_hashtag(h) for h in obj["hashtags"]],
                urls=list(obj["urls"]),
                **{k: _as_count(tweets_path, line_no, k, obj[k]) for k in _COUNT_FIELDS},
            )
        )

    tweets.sort(key=lambda t: (t.time, t.user_id, t.tweet_id))

    url_documents: dict[str, UrlDocument] = {}
    missing_urls: set[str] = set()
    for tweet in tweets:
        for url in tweet.urls:
            doc = url_documents.get(url)
            if doc is None:
                if url in contents:
                    doc = UrlDocument(url, contents[url])
                else:
                    if url not in missing_urls:
                        missing_urls.add(url)
                        logger.warning("no content for url %r; substituting empty text", url)
                    doc = UrlDocument(url, "")
                url_documents[url] = doc
            doc.sharers.add(tweet.user_id)
    unreferenced = set(contents) - set(url_documents)
    if unreferenced:
        logger.debug("dropping %d urls never shared by any tweet", len(unreferenced))

    return Corpus(
        tweets=tweets,
        profiles=dict(sorted(profiles.items())),
        url_documents=dict(sorted(url_documents.items())),
        config=config,
    )


def write_corpus(corpus: Corpus, out_dir) -> dict[str, Path]:
    """Serialize a corpus to tweets/profiles/urls JSONL files.

    Records are written in canonical order so equal corpora produce
    byte-identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "tweets": out_dir / "tweets.jsonl",
        "profiles": out_dir / "profiles.jsonl",
        "urls": out_dir / "urls.jsonl",
    }

    def dump(obj) -> str:
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))

    with open(paths["tweets"], "w", encoding="utf-8") as fh:
        for t in sorted(corpus.tweets, key=lambda t: (t.time, t.user_id, t.tweet_id)):
            fh.write(
                dump(
                    {
                        "tweet_id": t.tweet_id,
                        "user_id": t.user_id,
                        "message_id": t.message_id,
                        "time": t.time,
                        "text": t.text,
                        "hashtags": t.hashtags,
                        "urls": t.urls,
                        "retweet_count": t.retweet_count,
                        "reply_count": t.reply_count,
                        "favorite_count": t.favorite_count,
                        "mention_count": t.mention_count,
                    }
                )
                + "\n"
            )
    with open(paths["profiles"], "w", encoding="utf-8") as fh:
        for uid in sorted(corpus.profiles):
            p = corpus.profiles[uid]
            fh.write(
                dump(
                    {
                        "user_id": p.user_id,
                        "statuses_count": p.statuses_count,
                        "followers_count": p.followers_count,
                        "friends_count": p.friends_count,
                        "favorites_count": p.favorites_count,
                        "listed_count": p.listed_count,
                        "default_profile": p.default_profile,
                        "geo_enabled": p.geo_enabled,
                        "profile_uses_background_image": p.profile_uses_background_image,
                        "verified": p.verified,
                        "protected": p.protected,
                        "label": None if p.label is Label.UNLABELED else p.label.value,
                    }
                )
                + "\n"
            )
    with open(paths["urls"], "w", encoding="utf-8") as fh:
        for url in sorted(corpus.url_documents):
            doc = corpus.url_documents[url]
            fh.write(dump({"url": doc.url, "content": doc.content}) + "\n")
    return paths


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

@dataclass
class SynthParams:
    """Knobs for the synthetic corpus; effect sizes are all here so the
    planted signal can be tuned without code changes."""

    n_users: int = 200
    psm_fraction: float = 0.25
    n_cascades: int = 120
    psm_vocab_size: int = 60
    normal_vocab_size: int = 60
    viral_fraction: float = 0.35
    psm_early_bias: float = 0.70
    psm_late_rate: float = 0.10
    nonviral_psm_rate: float = 0.15
    psm_source_bias: float = 0.92
    normal_source_bias: float = 0.95
    flagged_share: float = 0.70
    psm_hashtag_rate: float = 0.12
    normal_hashtag_rate: float = 0.03
    quote_prob: float = 0.06
    n_psm_urls: int = 120
    n_normal_urls: int = 180
    urls_per_user_mean: float = 4.0
    chatter_tweets_per_user: int = 2
    url_in_tweet_prob: float = 0.80

    def validate(self) -> "SynthParams":
        if self.n_users < 20:
            raise InvalidParams(f"n_users must be >= 20, got {self.n_users}")
        if not 0.0 < self.psm_fraction < 1.0:
            raise InvalidParams("psm_fraction must be in (0, 1)")
        if self.n_cascades < 1:
            raise InvalidParams("n_cascades must be >= 1")
        if self.psm_vocab_size < 10 or self.normal_vocab_size < 10:
            raise InvalidParams("vocabulary sizes must be >= 10")
        for name in (
            "viral_fraction",
            "psm_early_bias",
            "psm_late_rate",
            "nonviral_psm_rate",
            "psm_source_bias",
            "normal_source_bias",
            "flagged_share",
            "psm_hashtag_rate",
            "normal_hashtag_rate",
            "quote_prob",
            "url_in_tweet_prob",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParams(f"{name} must be in [0, 1], got {v}")
        if self.n_psm_urls < 1 or self.n_normal_urls < 1:
            raise InvalidParams("url pool sizes must be >= 1")
        return self


_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aiou"

# Function-word pools steer the part-of-speech variety of generated text.
# The wide pool spans seven tag classes, the narrow pool only two.
_WIDE_FUNCTION_WORDS = (
    "the", "a", "in", "on", "and", "or", "not", "very",
    "big", "new", "run", "win", "two", "they", "must",
)
_NARROW_FUNCTION_WORDS = ("the", "of", "in")


def _syllable(rng) -> str:
    return _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]


def _make_word(rng, n_syllables: int) -> str:
    # CV syllables with a final consonant: vowel-group count equals the
    # syllable count, which the readability planting relies on.
    return "".join(_syllable(rng) for _ in range(n_syllables)) + _CONSONANTS[
        rng.integers(len(_CONSONANTS))
    ]


def _make_vocab(rng, size: int, syllables_low: int, syllables_high: int,
                taken: set[str]) -> list[str]:
    words: list[str] = []
    attempts = 0
    while len(words) < size:
        attempts += 1
        if attempts > 1000 * size:
            raise InvalidParams(
                f"cannot build a {size}-word vocabulary with "
                f"{syllables_low}-{syllables_high} syllables; space exhausted"
            )
        n_syll = int(rng.integers(syllables_low, syllables_high + 1))
        word = _make_word(rng, n_syll)
        if word in taken:
            continue
        taken.add(word)
        words.append(word)
    return words


def _make_document(rng, topic_vocab, function_words, function_rate,
                   n_sentences_range, sentence_len_range, quote_prob) -> str:
    sentences = []
    n_sentences = int(rng.integers(*n_sentences_range))
    for _ in range(n_sentences):
        n_words = int(rng.integers(*sentence_len_range))
        words = []
        for _ in range(n_words):
            if rng.random() < function_rate:
                words.append(function_words[rng.integers(len(function_words))])
            else:
                words.append(topic_vocab[rng.integers(len(topic_vocab))])
        sentences.append(" ".join(words) + ".")
    if rng.random() < quote_prob:
        quoted = " ".join(
            topic_vocab[rng.integers(len(topic_vocab))] for _ in range(4)
        )
        sentences.append(f'they said "{quoted}".')
    return " ".join(sentences)


def generate_synthetic(params: SynthParams, seed: int,
                       config: PipelineConfig | None = None) -> Corpus:
    """Build a labeled corpus with planted PSM behavior.

    Deterministic for a fixed seed: the RNG is consumed in a fixed order and
    every container is assembled in a canonical order.
    """
    params.validate()
    if config is None:
        config = default_config()
    rng = np.random.default_rng(seed)

    n_psm = int(np.floor(params.n_users * params.psm_fraction))
    user_ids = [f"u{idx:05d}" for idx in range(params.n_users)]
    psm_set = set(np.array(user_ids)[rng.permutation(params.n_users)[:n_psm]].tolist())
    psm_users = [u for u in user_ids if u in psm_set]
    normal_users = [u for u in user_ids if u not in psm_set]

    profiles = {}
    for uid in user_ids:
        is_psm = uid in psm_set
        if is_psm:
            # bimodal activity: hyperactive amplifiers and dormant sleepers.
            # Both counts follow the same hidden mode, so the marginals stay
            # uninformative while the joint pattern separates the classes.
            amplifier = rng.random() < 0.5
            statuses = rng.lognormal(8.5 if amplifier else 5.1, 0.55)
            favorites = rng.lognormal(6.7 if amplifier else 4.3, 0.6)
        else:
            statuses = rng.lognormal(6.9, 0.8)
            favorites = rng.lognormal(5.5, 1.2)
        profiles[uid] = UserProfile(
            user_id=uid,
            statuses_count=int(statuses),
            followers_count=int(rng.lognormal(4.8 if is_psm else 5.3, 1.2)),
            friends_count=int(rng.lognormal(6.0 if is_psm else 5.5, 1.0)),
            favorites_count=int(favorites),
            listed_count=int(rng.lognormal(1.4 if is_psm else 1.9, 1.1)),
            default_profile=int(rng.random() < (0.50 if is_psm else 0.33)),
            geo_enabled=int(rng.random() < (0.22 if is_psm else 0.38)),
            profile_uses_background_image=int(rng.random() < (0.65 if is_psm else 0.82)),
            verified=int(rng.random() < (0.01 if is_psm else 0.05)),
            protected=int(rng.random() < 0.03),
            label=Label.PSM if is_psm else Label.NORMAL,
        )

    taken: set[str] = set()
    psm_vocab = _make_vocab(rng, params.psm_vocab_size, 1, 1, taken)
    normal_vocab = _make_vocab(rng, params.normal_vocab_size, 3, 5, taken)

    flagged = [d for d in config.flagged_websites if d]
    psm_tlds = ("com", "ru", "se", "info", "co")
    normal_tlds = ("com", "org", "se", "gov", "co", "com")

    def _psm_url(idx: int) -> str:
        if flagged and rng.random() < params.flagged_share:
            host = flagged[rng.integers(len(flagged))]
        else:
            host = f"{_syllable(rng)}{_syllable(rng)}-news.{psm_tlds[rng.integers(len(psm_tlds))]}"
        scheme = "https" if rng.random() < 0.55 else "http"
        return f"{scheme}://{host}/p{idx}"

    def _normal_url(idx: int) -> str:
        host = f"{_syllable(rng)}{_syllable(rng)}{_syllable(rng)}.{normal_tlds[rng.integers(len(normal_tlds))]}"
        scheme = "https" if rng.random() < 0.75 else "http"
        return f"{scheme}://{host}/a{idx}"

    psm_pool = []
    for idx in range(params.n_psm_urls):
        url = _psm_url(idx)
        content = _make_document(
            rng, psm_vocab, _WIDE_FUNCTION_WORDS, 0.25, (4, 8), (5, 9), params.quote_prob
        )
        psm_pool.append((url, content))
    normal_pool = []
    for idx in range(params.n_normal_urls):
        url = _normal_url(idx)
        content = _make_document(
            rng, normal_vocab, _NARROW_FUNCTION_WORDS, 0.20, (6, 11), (12, 18), params.quote_prob
        )
        normal_pool.append((url, content))

    pool_contents = dict(psm_pool) | dict(normal_pool)
    user_urls: dict[str, list[str]] = {}
    for uid in user_ids:
        is_psm = uid in psm_set
        n_urls = max(1, int(rng.poisson(params.urls_per_user_mean)))
        urls = []
        for _ in range(n_urls):
            own_bias = params.psm_source_bias if is_psm else params.normal_source_bias
            own_pool = psm_pool if is_psm else normal_pool
            other_pool = normal_pool if is_psm else psm_pool
            pool = own_pool if rng.random() < own_bias else other_pool
            urls.append(pool[rng.integers(len(pool))][0])
        user_urls[uid] = urls

    suspicious = [h for h in config.suspicious_hashtags if h]
    benign_tags = [w for w in (psm_vocab[:10] + normal_vocab[:10])]

    tweets: list[TweetRecord] = []
    tweet_counter = 0
    base_time = 1_500_000_000

    def _emit_tweet(uid: str, message_id: str, time: int) -> None:
        nonlocal tweet_counter
        is_psm = uid in psm_set
        hashtags = []
        rate = params.psm_hashtag_rate if is_psm else params.normal_hashtag_rate
        if suspicious and rng.random() < rate:
            hashtags.append(suspicious[rng.integers(len(suspicious))])
        for _ in range(int(rng.integers(0, 3))):
            hashtags.append(benign_tags[rng.integers(len(benign_tags))])
        urls = []
        if user_urls[uid] and rng.random() < params.url_in_tweet_prob:
            urls.append(user_urls[uid][rng.integers(len(user_urls[uid]))])
        vocab = psm_vocab if is_psm else normal_vocab
        text = " ".join(vocab[rng.integers(len(vocab))] for _ in range(6))
        tweets.append(
            TweetRecord(
                tweet_id=f"t{tweet_counter:08d}",
                user_id=uid,
                message_id=message_id,
                time=time,
                text=text,
                hashtags=hashtags,
                urls=urls,
                retweet_count=int(rng.poisson(2.0)),
                reply_count=int(rng.poisson(1.0)),
                favorite_count=int(rng.poisson(1.6 if is_psm else 2.2)),
                mention_count=int(rng.poisson(1.6 if is_psm else 1.0)),
            )
        )
        tweet_counter += 1

    theta = config.theta
    for c_idx in range(params.n_cascades):
        message_id = f"m{c_idx:06d}"
        viral = rng.random() < params.viral_fraction
        if viral:
            size = theta + int(rng.geometric(0.08))
        else:
            size = int(rng.integers(2, max(3, theta)))
        size = min(size, params.n_users)
        psm_order = list(rng.permutation(len(psm_users)))
        normal_order = list(rng.permutation(len(normal_users)))
        chosen: list[str] = []
        for slot in range(size):
            if viral and slot < theta:
                want_psm = rng.random() < params.psm_early_bias
            elif viral:
                want_psm = rng.random() < params.psm_late_rate
            else:
                want_psm = rng.random() < params.nonviral_psm_rate
            if want_psm and psm_order:
                chosen.append(psm_users[psm_order.pop()])
            elif normal_order:
                chosen.append(normal_users[normal_order.pop()])
            elif psm_order:
                chosen.append(psm_users[psm_order.pop()])
            else:
                break
        time = base_time + c_idx * 20_000
        for uid in chosen:
            time += int(rng.integers(1, 600))
            _emit_tweet(uid, message_id, time)

    n_chatter = max(20, params.n_users // 5)
    chatter_time = base_time + params.n_cascades * 20_000 + 1_000_000
    for uid in user_ids:
        for _ in range(params.chatter_tweets_per_user):
            message_id = f"c{int(rng.integers(n_chatter)):06d}"
            time = chatter_time + int(rng.integers(0, 5_000_000))
            _emit_tweet(uid, message_id, time)

    # Drop any accidental (user, message, time) collisions among chatter tweets.
    seen: set[tuple[str, str, int]] = set()
    deduped = []
    for t in tweets:
        key = (t.user_id, t.message_id, t.time)
        if key in seen:
            continue
        seen.add(key)
        deduped.append(t)
    deduped.sort(key=lambda t: (t.time, t.user_id, t.tweet_id))

    url_documents: dict[str, UrlDocument] = {}
    for t in deduped:
        for url in t.urls:
            doc = url_documents.setdefault(url, UrlDocument(url, pool_contents[url]))
            doc.sharers.add(t.user_id)

    return Corpus(
        tweets=deduped,
        profiles=dict(sorted(profiles.items())),
        url_documents=dict(sorted(url_documents.items())),
        config=config,
    )
