"""Cascade construction from the action log.

A cascade is every action sharing one message id, ordered by
(time, user_id, tweet_id). A cascade is viral when it has at least theta
actions; its key users are the distinct users among the first theta
actions ("early adopters"). Repeat actions by one user count once for
key-user membership and precedence: adoption is the earliest action.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .corpus import ActionRecord, Corpus
from .errors import InvalidParams


@dataclass
class Cascade:
    message_id: str
    actions: list[ActionRecord]
    is_viral: bool
    viral_point_index: int | None
    key_users: set[str]
    # earliest (time, user_id) sort key per participant; used for precedence
    first_adoption: dict[str, tuple[int, str]] = field(default_factory=dict)

    def participants(self) -> set[str]:
        return set(self.first_adoption)


def build_cascades(corpus: Corpus, theta: int) -> list[Cascade]:
    """Group the deduplicated action log into per-message cascades."""
    if theta < 2:
        raise InvalidParams(f"theta must be >= 2, got {theta}")
    by_message: dict[str, list[tuple[int, str, str]]] = {}
    for tweet in corpus.tweets:
        by_message.setdefault(tweet.message_id, []).append(
            (tweet.time, tweet.user_id, tweet.tweet_id)
        )
    cascades = []
    for message_id in sorted(by_message):
        rows = sorted(by_message[message_id])
        actions = [ActionRecord(uid, message_id, time) for time, uid, _ in rows]
        first_adoption: dict[str, tuple[int, str]] = {}
        for time, uid, _ in rows:
            if uid not in first_adoption:
                first_adoption[uid] = (time, uid)
        is_viral = len(actions) >= theta
        key_users = {a.user_id for a in actions[:theta]} if is_viral else set()
        cascades.append(
            Cascade(
                message_id=message_id,
                actions=actions,
                is_viral=is_viral,
                viral_point_index=theta - 1 if is_viral else None,
                key_users=key_users,
                first_adoption=first_adoption,
            )
        )
    return cascades


def precedes(cascade: Cascade, i: str, j: str) -> bool:
    """True iff both users participate and i's first adoption strictly
    precedes j's under the (time, user_id) tie-break order."""
    ki = cascade.first_adoption.get(i)
    kj = cascade.first_adoption.get(j)
    return ki is not None and kj is not None and ki < kj


def cascade_size_histogram(cascades: list[Cascade], min_size: int = 1) -> list[tuple[int, int]]:
    """(size, frequency) pairs sorted by size, for sizes >= min_size."""
    if min_size < 1:
        raise InvalidParams(f"min_size must be >= 1, got {min_size}")
    counts: dict[int, int] = {}
    for cascade in cascades:
        size = len(cascade.actions)
        if size >= min_size:
            counts[size] = counts.get(size, 0) + 1
    return sorted(counts.items())
