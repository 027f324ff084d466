import json

import pytest

from psmdetect.config import default_config
from psmdetect.corpus import SynthParams, generate_synthetic


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def tweet_record(**overrides):
    base = {
        "tweet_id": "t1",
        "user_id": "u1",
        "message_id": "m1",
        "time": 100,
        "text": "hello world",
        "hashtags": [],
        "urls": [],
        "retweet_count": 0,
        "reply_count": 0,
        "favorite_count": 0,
        "mention_count": 0,
    }
    base.update(overrides)
    return base


def profile_record(**overrides):
    base = {
        "user_id": "u1",
        "statuses_count": 10,
        "followers_count": 5,
        "friends_count": 3,
        "favorites_count": 2,
        "listed_count": 1,
        "default_profile": 1,
        "geo_enabled": 0,
        "profile_uses_background_image": 1,
        "verified": 0,
        "protected": 0,
        "label": "normal",
    }
    base.update(overrides)
    return base


@pytest.fixture(scope="session")
def small_synthetic():
    """Shared desk-scale corpus; cheap enough for many tests."""
    config = default_config()
    config.lda.iterations = 60
    config.gbdt.n_estimators = 30
    params = SynthParams(n_users=80, n_cascades=30)
    return generate_synthetic(params, seed=11, config=config)
