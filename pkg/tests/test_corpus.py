import logging

import pytest

from psmdetect.config import default_config
from psmdetect.corpus import (
    Label,
    SynthParams,
    generate_synthetic,
    load_corpus,
    write_corpus,
)
from psmdetect.errors import InvalidParams, MalformedRecord, MissingProfile

from conftest import profile_record, tweet_record, write_jsonl


def _load(tmp_path, tweets, profiles, urls):
    tp = write_jsonl(tmp_path / "tweets.jsonl", tweets)
    pp = write_jsonl(tmp_path / "profiles.jsonl", profiles)
    up = write_jsonl(tmp_path / "urls.jsonl", urls)
    return load_corpus(tp, pp, up, default_config())


def test_direct_load_three_tweets(tmp_path):
    tweets = [
        tweet_record(tweet_id=f"t{i}", time=100 + i, message_id="m1")
        for i in range(3)
    ]
    corpus = _load(tmp_path, tweets, [profile_record()], [])
    assert len(corpus.tweets) == 3
    assert corpus.profiles["u1"].label is Label.NORMAL


def test_unknown_user_raises_missing_profile(tmp_path):
    tweets = [tweet_record(user_id="ghost")]
    with pytest.raises(MissingProfile):
        _load(tmp_path, tweets, [profile_record()], [])


def test_duplicate_action_dropped_with_one_warning(tmp_path, caplog):
    tweets = [
        tweet_record(tweet_id="t1"),
        tweet_record(tweet_id="t2"),  # same (user, message, time) triple
    ]
    with caplog.at_level(logging.WARNING, logger="psmdetect.corpus"):
        corpus = _load(tmp_path, tweets, [profile_record()], [])
    assert len(corpus.tweets) == 1
    assert sum("duplicate action" in r.message for r in caplog.records) == 1


def test_missing_url_content_substitutes_empty(tmp_path, caplog):
    tweets = [tweet_record(urls=["https://example.com/x"])]
    with caplog.at_level(logging.WARNING, logger="psmdetect.corpus"):
        corpus = _load(tmp_path, tweets, [profile_record()], [])
    doc = corpus.url_documents["https://example.com/x"]
    assert doc.content == ""
    assert doc.sharers == {"u1"}
    assert any("no content for url" in r.message for r in caplog.records)


def test_malformed_records(tmp_path):
    bad_rows = [
        tweet_record(time=-1),
        tweet_record(retweet_count=-2),
        {"bogus": 1},
        tweet_record(hashtags="notalist"),
    ]
    for row in bad_rows:
        with pytest.raises(MalformedRecord):
            _load(tmp_path, [row], [profile_record()], [])
    with pytest.raises(MalformedRecord):
        _load(tmp_path, [tweet_record()], [profile_record(label="banana")], [])
    with pytest.raises(MalformedRecord):
        _load(tmp_path, [tweet_record()], [profile_record(), profile_record()], [])
    with pytest.raises(MalformedRecord):
        _load(tmp_path, [tweet_record()], [profile_record()],
              [{"url": "nohost", "content": "x"}])


def test_hashtags_normalized(tmp_path):
    tweets = [tweet_record(hashtags=["#Swexit", "SD"])]
    corpus = _load(tmp_path, tweets, [profile_record()], [])
    assert corpus.tweets[0].hashtags == ["swexit", "sd"]


def test_roundtrip_equality(tmp_path, small_synthetic):
    out = tmp_path / "corpus"
    paths = write_corpus(small_synthetic, out)
    reloaded = load_corpus(
        paths["tweets"], paths["profiles"], paths["urls"], small_synthetic.config
    )
    assert reloaded == small_synthetic


def test_synthetic_determinism_byte_identical(tmp_path):
    params = SynthParams(n_users=40, n_cascades=10)
    a = generate_synthetic(params, seed=7)
    b = generate_synthetic(params, seed=7)
    assert a == b
    pa = write_corpus(a, tmp_path / "a")
    pb = write_corpus(b, tmp_path / "b")
    for name in pa:
        assert pa[name].read_bytes() == pb[name].read_bytes()
    c = generate_synthetic(params, seed=8)
    assert c != a


def test_synthetic_label_count_is_floor():
    corpus = generate_synthetic(SynthParams(n_users=50, psm_fraction=0.33), seed=1)
    n_psm = sum(1 for p in corpus.profiles.values() if p.label is Label.PSM)
    assert n_psm == int(50 * 0.33)  # floor(16.5) = 16


def test_synthetic_has_viral_cascade(small_synthetic):
    theta = small_synthetic.config.theta
    sizes = {}
    for t in small_synthetic.tweets:
        sizes[t.message_id] = sizes.get(t.message_id, 0) + 1
    assert max(sizes.values()) >= theta


def test_synthetic_integrity(small_synthetic):
    for tweet in small_synthetic.tweets:
        assert tweet.user_id in small_synthetic.profiles
        for url in tweet.urls:
            assert url in small_synthetic.url_documents
    for doc in small_synthetic.url_documents.values():
        assert doc.sharers


def test_invalid_synth_params():
    with pytest.raises(InvalidParams):
        SynthParams(n_users=5).validate()
    with pytest.raises(InvalidParams):
        SynthParams(psm_fraction=1.5).validate()
    with pytest.raises(InvalidParams):
        SynthParams(n_cascades=0).validate()
    with pytest.raises(InvalidParams):
        SynthParams(psm_vocab_size=3).validate()


def test_default_params_reach_viral_threshold():
    corpus = generate_synthetic(SynthParams(), seed=2)
    theta = corpus.config.theta
    sizes = {}
    for t in corpus.tweets:
        sizes[t.message_id] = sizes.get(t.message_id, 0) + 1
    assert max(sizes.values()) >= theta
