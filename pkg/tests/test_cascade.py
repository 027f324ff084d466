import numpy as np
import pytest

from psmdetect.cascade import build_cascades, cascade_size_histogram, precedes
from psmdetect.config import default_config
from psmdetect.corpus import Corpus, TweetRecord
from psmdetect.errors import InvalidParams


def make_corpus(actions):
    """actions: list of (user, message, time) triples."""
    tweets = [
        TweetRecord(
            tweet_id=f"t{i}", user_id=u, message_id=m, time=t, text="",
            hashtags=[], urls=[], retweet_count=0, reply_count=0,
            favorite_count=0, mention_count=0,
        )
        for i, (u, m, t) in enumerate(actions)
    ]
    tweets.sort(key=lambda t: (t.time, t.user_id, t.tweet_id))
    return Corpus(tweets=tweets, profiles={}, url_documents={}, config=default_config())


def test_nineteen_actions_not_viral():
    corpus = make_corpus([(f"u{i:02d}", "m1", i) for i in range(19)])
    (cascade,) = build_cascades(corpus, theta=20)
    assert not cascade.is_viral
    assert cascade.key_users == set()
    assert cascade.viral_point_index is None


def test_empty_corpus():
    assert build_cascades(make_corpus([]), theta=20) == []


def test_key_users_are_first_theta_under_tiebreak():
    # 25 distinct users; two tie on time and are ordered by user id
    actions = [(f"u{i:02d}", "m1", 10 * i) for i in range(25)]
    actions[19] = ("u19", "m1", 180)  # ties with u18 at t=180
    corpus = make_corpus(actions)
    (cascade,) = build_cascades(corpus, theta=20)
    assert cascade.is_viral and cascade.viral_point_index == 19
    # hand enumeration: sort by (time, user) and take the first 20 users
    expected = {u for _, u in sorted((t, u) for u, _, t in actions)[:20]}
    assert cascade.key_users == expected
    assert len(cascade.key_users) == 20


def test_repeat_actions_count_once():
    actions = [("a", "m1", 1), ("a", "m1", 5), ("b", "m1", 3)]
    corpus = make_corpus(actions)
    (cascade,) = build_cascades(corpus, theta=2)
    assert len(cascade.actions) == 3
    assert cascade.key_users == {"a", "b"}  # first two actions are a then b


def test_theta_validation():
    with pytest.raises(InvalidParams):
        build_cascades(make_corpus([]), theta=1)


def test_action_count_conservation(small_synthetic):
    cascades = build_cascades(small_synthetic, small_synthetic.config.theta)
    assert sum(len(c.actions) for c in cascades) == len(small_synthetic.tweets)
    for cascade in cascades:
        assert cascade.key_users <= cascade.participants()
        assert len(cascade.key_users) <= small_synthetic.config.theta
        times = [(a.time, a.user_id) for a in cascade.actions]
        assert times == sorted(times)


def test_histogram_counts():
    corpus = make_corpus(
        [("a", "m1", 1), ("b", "m1", 2), ("c", "m1", 3),
         ("a", "m2", 1), ("b", "m2", 2), ("c", "m2", 3),
         ("a", "m3", 1), ("b", "m3", 2), ("c", "m3", 3), ("d", "m3", 4), ("e", "m3", 5)]
    )
    cascades = build_cascades(corpus, theta=20)
    assert cascade_size_histogram(cascades, 1) == [(3, 2), (5, 1)]
    assert cascade_size_histogram(cascades, 4) == [(5, 1)]
    with pytest.raises(InvalidParams):
        cascade_size_histogram(cascades, 0)


def test_histogram_frequency_sum(small_synthetic):
    cascades = build_cascades(small_synthetic, small_synthetic.config.theta)
    for min_size in (1, 2, 5):
        hist = cascade_size_histogram(cascades, min_size)
        qualifying = sum(1 for c in cascades if len(c.actions) >= min_size)
        assert sum(freq for _, freq in hist) == qualifying
        sizes = [s for s, _ in hist]
        assert sizes == sorted(sizes) and all(s >= min_size for s in sizes)


def test_precedes():
    corpus = make_corpus([("i", "m1", 1), ("j", "m1", 5), ("k", "m1", 4), ("l", "m1", 4)])
    (cascade,) = build_cascades(corpus, theta=2)
    assert precedes(cascade, "i", "j")
    assert not precedes(cascade, "j", "i")
    assert not precedes(cascade, "absent", "j")
    assert not precedes(cascade, "i", "absent")
    # tie at t=4 resolved by user id: k < l
    assert precedes(cascade, "k", "l")
    assert not precedes(cascade, "l", "k")


def test_precedes_asymmetry_random():
    rng = np.random.default_rng(0)
    for _ in range(20):
        users = [f"u{i}" for i in range(6)]
        actions = [
            (users[rng.integers(6)], "m", int(rng.integers(10))) for _ in range(12)
        ]
        # dedup exact triples as the loader would
        actions = list(dict.fromkeys(actions))
        corpus = make_corpus(actions)
        (cascade,) = build_cascades(corpus, theta=3)
        for i in users:
            for j in users:
                assert not (precedes(cascade, i, j) and precedes(cascade, j, i))
