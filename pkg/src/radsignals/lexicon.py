"""Seed-community lexicon from a weighted log-odds contrast.

Token counts of the seed users' self-drafted tweets are compared with the
counts of everyone else's self-drafted tweets. Each token gets the
log-odds difference under a uniform Dirichlet prior, its approximate
variance, and the standardized score ``z = delta / sqrt(variance)``.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .matchers import lexicon_token_filter


@dataclass(frozen=True)
class CorpusCounts:
    counts: Mapping[str, int]
    total: int = field(init=False)

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("negative token count")
        object.__setattr__(self, "total", int(sum(self.counts.values())))

    @classmethod
    def from_users(cls, aggregates, users: Iterable[str]) -> "CorpusCounts":
        c = Counter()
        for u in users:
            c.update(aggregates[u].tokens)
        return cls(dict(c))


@dataclass(frozen=True)
class LogOddsEntry:
    token: str
    y1: int
    y2: int
    delta: float
    variance: float
    z: float


def weighted_log_odds(seed: CorpusCounts, background: CorpusCounts, alpha: float = 0.01) -> list[LogOddsEntry]:
    """One entry per token of the joint vocabulary, sorted by token.

    With ``a0 = alpha * |V|``::

        delta = ln((y1+a)/(n1+a0-y1-a)) - ln((y2+a)/(n2+a0-y2-a))
        variance = 1/(y1+a) + 1/(y2+a)
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if seed.total == 0 or background.total == 0:
        raise ValueError("both corpora must be non-empty")
    vocab = sorted(set(seed.counts) | set(background.counts))
    if len(vocab) < 2:
        raise ValueError("vocabulary needs at least two tokens")
    y1 = np.array([seed.counts.get(w, 0) for w in vocab], dtype=float)
    y2 = np.array([background.counts.get(w, 0) for w in vocab], dtype=float)
    a0 = alpha * len(vocab)
    n1, n2 = float(seed.total), float(background.total)
    delta = (np.log(y1 + alpha) - np.log(n1 + a0 - y1 - alpha)) - (
        np.log(y2 + alpha) - np.log(n2 + a0 - y2 - alpha)
    )
    var = 1.0 / (y1 + alpha) + 1.0 / (y2 + alpha)
    z = delta / np.sqrt(var)
    return [
        LogOddsEntry(w, int(a), int(b), float(d), float(v), float(s))
        for w, a, b, d, v, s in zip(vocab, y1, y2, delta, var, z)
    ]


@dataclass
class Lexicon:
    tokens: frozenset
    provenance: dict  # token -> LogOddsEntry
    n_candidates: int  # size of the top fraction before filtering
    vocabulary_size: int

    @property
    def hashtag_count(self) -> int:
        return sum(1 for t in self.tokens if t.startswith("#"))

    def __contains__(self, token):
        return token in self.tokens

    def __iter__(self):
        return iter(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def ranked(self) -> list[LogOddsEntry]:
        return sorted(self.provenance.values(), key=lambda e: (-e.z, -e.y1, e.token))

    def write_tsv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["token", "y1", "y2", "delta", "z", "is_hashtag"])
            for e in self.ranked():
                w.writerow([e.token, e.y1, e.y2, repr(e.delta), repr(e.z), int(e.token.startswith("#"))])

    @classmethod
    def read_tsv(cls, path) -> "Lexicon":
        prov = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh, delimiter="\t"):
                d, z = float(row["delta"]), float(row["z"])
                var = (d / z) ** 2 if z else float("nan")
                prov[row["token"]] = LogOddsEntry(row["token"], int(row["y1"]), int(row["y2"]), d, var, z)
        return cls(frozenset(prov), prov, len(prov), 0)


def top_count(top_fraction: float, vocabulary_size: int) -> int:
    """``ceil(top_fraction * |V|)`` without float noise pushing exact products up."""
    return math.ceil(round(top_fraction * vocabulary_size, 9))


def build_lexicon(entries: list[LogOddsEntry], top_fraction: float = 0.005,
                  token_filter: Callable[[str], bool] = lexicon_token_filter,
                  rank_by: str = "z") -> Lexicon:
    """Keep the top ``top_fraction`` of the vocabulary, then drop filtered tokens.

    Ties in the ranking score go to the larger seed count, then to the
    lexicographically smaller token.
    """
    if not 0 < top_fraction < 1:
        raise ValueError("top_fraction must lie in (0, 1)")
    if rank_by not in ("z", "delta"):
        raise ValueError(f"rank_by must be 'z' or 'delta', got {rank_by!r}")
    n_top = top_count(top_fraction, len(entries))
    ranked = sorted(entries, key=lambda e: (-getattr(e, rank_by), -e.y1, e.token))
    top = ranked[:n_top]
    kept = {e.token: e for e in top if token_filter(e.token)}
    return Lexicon(frozenset(kept), kept, n_top, len(entries))
