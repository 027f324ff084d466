"""User-level causality attributes over viral cascades.

Candidate causes are users who were key users of at least one viral
cascade (they adopted a message before it went viral, so they precede the
effect and plausibly raise its likelihood). For an ordered user pair
(i, j) with i a candidate:

    p[i,j]  = n_prec_viral / n_prec          (viral rate when i precedes j)
    p'[i,j] = n_noprec_viral / n_noprec      (viral rate when j participates
                                              without i preceding)

Pairs never observed (n_prec = 0) are omitted; pairs with n_noprec = 0 are
kept in the pair statistics but skipped when scoring, since p' is
undefined. Four per-user attributes follow, with R(i) the retained pairs
of cause i and Q(j) the retained causes of effect j:

    kandm(i) = mean over j in R(i) of (p - p')
    rel(i)   = mean over j in R(i) of S(i,j), where S compares p and p'
               as a smoothed likelihood ratio (see relative_likelihood)
    nb(j)    = mean over i in Q(j) of kandm(i)
    wnb(j)   = weighted mean of kandm(i) over Q(j), weighting each cause
               by n_prec(i,j) / (cascades i participates in)

Users with both R and Q empty score zero on all four attributes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .cascade import Cascade
from .errors import InvalidParams

logger = logging.getLogger(__name__)


@dataclass
class CausalScores:
    user_id: str
    kandm: float = 0.0
    rel: float = 0.0
    nb: float = 0.0
    wnb: float = 0.0


@dataclass
class PairStats:
    i: str
    j: str
    n_prec: int = 0
    n_prec_viral: int = 0
    n_noprec: int = 0
    n_noprec_viral: int = 0


def participation_counts(cascades: list[Cascade]) -> tuple[dict[str, int], dict[str, int]]:
    """Per user: cascades participated in, and how many of those were viral."""
    n_casc: dict[str, int] = {}
    n_viral: dict[str, int] = {}
    for cascade in cascades:
        for uid in cascade.first_adoption:
            n_casc[uid] = n_casc.get(uid, 0) + 1
            if cascade.is_viral:
                n_viral[uid] = n_viral.get(uid, 0) + 1
    return n_casc, n_viral


def prima_facie_candidates(cascades: list[Cascade]) -> set[str]:
    """Users who were a key user of at least one viral cascade."""
    candidates: set[str] = set()
    for cascade in cascades:
        if cascade.is_viral:
            candidates.update(cascade.key_users)
    return candidates


def pair_stats(cascades: list[Cascade]) -> dict[tuple[str, str], PairStats]:
    """Precedence counts for every ordered pair (i, j) with i a prima facie
    candidate and i preceding j in at least one cascade."""
    candidates = prima_facie_candidates(cascades)
    n_casc, n_viral = participation_counts(cascades)
    pairs: dict[tuple[str, str], PairStats] = {}
    for cascade in cascades:
        ordered = sorted(cascade.first_adoption, key=cascade.first_adoption.get)
        for a, earlier in enumerate(ordered):
            if earlier not in candidates:
                continue
            for later in ordered[a + 1:]:
                stats = pairs.get((earlier, later))
                if stats is None:
                    stats = pairs[(earlier, later)] = PairStats(earlier, later)
                stats.n_prec += 1
                if cascade.is_viral:
                    stats.n_prec_viral += 1
    for (_, j), stats in pairs.items():
        stats.n_noprec = n_casc[j] - stats.n_prec
        stats.n_noprec_viral = n_viral.get(j, 0) - stats.n_prec_viral
    return pairs


def relative_likelihood(p: float, p_not: float, alpha: float) -> float:
    """Signed, smoothed comparison of p against p_not, zero when equal."""
    if p > p_not:
        return p / (p_not + alpha) - 1.0
    if p < p_not:
        return -(p_not / (p + alpha) - 1.0)
    return 0.0


def causal_scores(cascades: list[Cascade], alpha: float = 0.001) -> dict[str, CausalScores]:
    """The four causality attributes for every cascade participant."""
    if alpha <= 0:
        raise InvalidParams(f"alpha must be > 0, got {alpha}")
    n_casc, _ = participation_counts(cascades)
    scores = {uid: CausalScores(uid) for uid in n_casc}
    if not any(c.is_viral for c in cascades):
        logger.warning("degenerate input: no viral cascade; all causal scores are zero")
        return scores

    pairs = pair_stats(cascades)
    retained: dict[str, list[PairStats]] = {}
    for (i, _), stats in pairs.items():
        if stats.n_noprec > 0:
            retained.setdefault(i, []).append(stats)

    effects: dict[str, list[tuple[str, float]]] = {}
    for i, stats_list in retained.items():
        kandm_sum = 0.0
        rel_sum = 0.0
        for stats in stats_list:
            p = stats.n_prec_viral / stats.n_prec
            p_not = stats.n_noprec_viral / stats.n_noprec
            kandm_sum += p - p_not
            rel_sum += relative_likelihood(p, p_not, alpha)
            weight = stats.n_prec / n_casc[i]
            effects.setdefault(stats.j, []).append((i, weight))
        scores[i].kandm = kandm_sum / len(stats_list)
        scores[i].rel = rel_sum / len(stats_list)

    for j, causes in effects.items():
        nb_sum = 0.0
        wnb_num = 0.0
        wnb_den = 0.0
        for i, weight in causes:
            kandm_i = scores[i].kandm
            nb_sum += kandm_i
            wnb_num += weight * kandm_i
            wnb_den += weight
        scores[j].nb = nb_sum / len(causes)
        scores[j].wnb = wnb_num / wnb_den
    return scores


def causal_feature_block(score: CausalScores) -> list[float]:
    """Fixed-order 4-entry block: [kandm, rel, nb, wnb]."""
    return [score.kandm, score.rel, score.nb, score.wnb]
