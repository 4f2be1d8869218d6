"""Per-user radicalization signals.

Two content signals (QAnon keyword/URL rate in tweets, matched-character
share of the profile) and two community signals (share of retweets aimed
at seed users, share of self-drafted tokens found in the seed lexicon).
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass

import numpy as np

from .corpus import UserAggregate, canonical_profile
from .matchers import DomainList, KeywordList, find_url_spans, scan

SIGNAL_NAMES = ("qc_tweets", "qc_profile", "c_retweets", "c_lexical")


class UndefinedSignal(ValueError):
    """A ratio whose denominator is zero for this user."""


@dataclass(frozen=True)
class SignalVector:
    qc_tweets: float
    qc_profile: float
    c_retweets: float
    c_lexical: float

    def __post_init__(self):
        vals = astuple(self)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite signal in {vals}")
        if self.qc_tweets < 0 or not all(0.0 <= v <= 1.0 for v in vals[1:]):
            raise ValueError(f"signal out of range: {vals}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def qc_tweets(agg: UserAggregate, scope: str = "all") -> float:
    """(keyword hits + QAnon URL hits) / tweets, over all tweets or self-drafted ones."""
    if scope == "all":
        num, den = agg.total_hits, agg.total_tweets
    elif scope == "self_drafted":
        num, den = agg.self_drafted_hits, agg.self_drafted
    else:
        raise ValueError(f"unknown scope {scope!r}")
    if den == 0:
        raise UndefinedSignal(f"{agg.user_id}: no tweets in scope {scope!r}")
    return num / den


def profile_match_spans(profile_text: str, keywords: KeywordList, domains: DomainList) -> list[tuple[int, int]]:
    """Non-overlapping matched character spans, longest first."""
    toks = scan(profile_text)
    cands = []
    for s, e, _ in keywords.find([t.text for t in toks]):
        cands.append((toks[s].start, toks[e - 1].end))
    cands.extend(find_url_spans(profile_text, domains))
    cands.sort(key=lambda sp: (sp[0] - sp[1], sp[0]))
    taken: list[tuple[int, int]] = []
    for s, e in cands:
        if all(e <= ts or s >= te for ts, te in taken):
            taken.append((s, e))
    return sorted(taken)


def qc_profile(profile_text: str, keywords: KeywordList, domains: DomainList) -> float:
    """Share of profile characters covered by QAnon keywords or URLs; 0 for an empty profile."""
    n = len(profile_text.lower())
    if n == 0:
        return 0.0
    spans = profile_match_spans(profile_text, keywords, domains)
    return sum(e - s for s, e in spans) / n


def c_retweets(agg: UserAggregate, seed_set) -> float:
    targets = agg.retweet_targets
    total = sum(targets.values())
    if total == 0:
        raise UndefinedSignal(f"{agg.user_id}: no retweets")
    return sum(c for t, c in targets.items() if t in seed_set) / total


def c_lexical(agg: UserAggregate, lexicon) -> float:
    """Fraction of the user's self-drafted tokens (with repeats) that are lexicon tokens."""
    total = sum(agg.tokens.values())
    if total == 0:
        raise UndefinedSignal(f"{agg.user_id}: no self-drafted tokens")
    return sum(c for t, c in agg.tokens.items() if t in lexicon) / total


def signal_vector(agg: UserAggregate, seed_set, lexicon, keywords: KeywordList,
                  domains: DomainList) -> SignalVector:
    return SignalVector(
        qc_tweets=qc_tweets(agg, "all"),
        qc_profile=qc_profile(canonical_profile(agg), keywords, domains),
        c_retweets=c_retweets(agg, seed_set),
        c_lexical=c_lexical(agg, lexicon),
    )


def feature_matrix(aggregates: dict[str, UserAggregate], seed_set, lexicon,
                   keywords: KeywordList, domains: DomainList) -> dict[str, SignalVector]:
    """Signal vectors for users with at least one retweet and one self-drafted tweet.

    Users whose self-drafted tweets yield no tokens at all have no lexical
    signal and are left out too.
    """
    lex = frozenset(lexicon)
    seeds = frozenset(seed_set)
    out = {}
    for uid in sorted(aggregates):
        agg = aggregates[uid]
        if agg.self_drafted == 0 or not agg.retweet_targets or not agg.tokens:
            continue
        out[uid] = signal_vector(agg, seeds, lex, keywords, domains)
    return out


def to_matrix(vectors: dict[str, SignalVector]) -> tuple[list[str], np.ndarray]:
    """Sorted user ids and the matching ``(n, 4)`` array."""
    users = sorted(vectors)
    X = np.array([astuple(vectors[u]) for u in users], dtype=float).reshape(len(users), 4)
    return users, X


def write_signals_csv(path, aggregates: dict[str, UserAggregate], vectors: dict[str, SignalVector]):
    cols = ["user_id", "qc_tweets", "qc_tweets_self_drafted", "qc_profile", "c_retweets", "c_lexical",
            "total_tweets", "self_drafted", "retweets", "tokens"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for uid in sorted(vectors):
            v, a = vectors[uid], aggregates[uid]
            w.writerow([uid, repr(v.qc_tweets), repr(qc_tweets(a, "self_drafted")), repr(v.qc_profile),
                        repr(v.c_retweets), repr(v.c_lexical), a.total_tweets, a.self_drafted,
                        a.n_retweets, sum(a.tokens.values())])
