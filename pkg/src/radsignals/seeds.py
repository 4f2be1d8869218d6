"""Persistent promoter selection and leaning-based validation.

Candidates must post QAnon content in self-drafted tweets at some point
and keep posting it every week before the platform intervention. The
candidate set is then screened with leanings inferred by label
propagation over the retweet graph; only right-leaning candidates stay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import sparse

from .corpus import AnalysisWindow, UserAggregate


@dataclass(frozen=True)
class SeedConfig:
    weekly_min_tweets: int = 10
    seed_weeks: int = 5
    require_self_drafted_overall: bool = True

    def __post_init__(self):
        if self.weekly_min_tweets < 1:
            raise ValueError("weekly_min_tweets must be >= 1")
        if self.seed_weeks < 1:
            raise ValueError("seed_weeks must be >= 1")


def is_persistent(agg: UserAggregate, config: SeedConfig = SeedConfig()) -> bool:
    if config.require_self_drafted_overall and agg.self_drafted_hits == 0:
        return False
    return all(
        agg.tweets_in_week(w) > config.weekly_min_tweets and agg.hits_in_week(w) > 0
        for w in range(config.seed_weeks)
    )


def select_persistent(aggregates: Mapping[str, UserAggregate], window: AnalysisWindow,
                      config: SeedConfig = SeedConfig()) -> set[str]:
    """Users with self-drafted QAnon content overall and, in each of the first
    ``seed_weeks`` weeks, more than ``weekly_min_tweets`` tweets with at least one hit."""
    if config.seed_weeks > window.n_weeks:
        raise ValueError("seed_weeks exceeds the analysis window")
    return {uid for uid, agg in aggregates.items() if is_persistent(agg, config)}


@dataclass(frozen=True)
class LeaningScore:
    user_id: str
    score: float
    label: str  # left | right | unknown
    is_seed_label: bool


def outlet_seed_scores(aggregates: Mapping[str, UserAggregate]) -> dict[str, float]:
    """+1/-1 for users whose shared outlet links lean mostly right/left."""
    out = {}
    for uid, a in aggregates.items():
        if a.right_outlet_urls > a.left_outlet_urls:
            out[uid] = 1.0
        elif a.left_outlet_urls > a.right_outlet_urls:
            out[uid] = -1.0
    return out


def _label(score: float, threshold: float) -> str:
    if abs(score) > threshold:
        return "right" if score > 0 else "left"
    return "unknown"


def propagation_system(retweet_edges: Mapping[tuple[str, str], float], seeds: Mapping[str, float]):
    """Node order and the symmetric weight matrix of the undirected retweet graph."""
    nodes = sorted({u for e in retweet_edges for u in e} | set(seeds))
    index = {u: i for i, u in enumerate(nodes)}
    rows, cols, vals = [], [], []
    for (src, dst), w in retweet_edges.items():
        if src == dst or w <= 0:
            continue
        i, j = index[src], index[dst]
        rows += [i, j]
        cols += [j, i]
        vals += [float(w), float(w)]
    n = len(nodes)
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n), dtype=float)
    W.sum_duplicates()
    return nodes, W


def infer_leanings(retweet_edges: Mapping[tuple[str, str], float], seed_scores: Mapping[str, float],
                   max_iters: int = 20000, threshold: float = 0.0, tol: float = 1e-6,
                   callback: Callable[[int, np.ndarray], None] | None = None) -> dict[str, LeaningScore]:
    """Soft label propagation with seeds clamped at +-1.

    Each round (Jacobi, synchronous) every unseeded node takes the
    edge-weighted mean of its neighbours' previous scores. Nodes never
    reached from a seed keep score 0 and end up ``unknown``.

    Iteration stops once the estimated distance to the fixed point,
    ``change * rho / (1 - rho)`` with ``rho`` the observed contraction
    of successive changes, drops below ``tol``. On fast-mixing graphs
    this is the plain max-change test; on slow ones it keeps going.
    """
    for u, s in seed_scores.items():
        if s not in (-1.0, 1.0):
            raise ValueError(f"seed score for {u!r} must be +-1, got {s}")
    nodes, W = propagation_system(retweet_edges, seed_scores)
    n = len(nodes)
    is_seed = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    for i, u in enumerate(nodes):
        if u in seed_scores:
            is_seed[i] = True
            x[i] = seed_scores[u]
    deg = np.asarray(W.sum(axis=1)).ravel()
    free = ~is_seed & (deg > 0)
    inv_deg = np.zeros(n)
    inv_deg[free] = 1.0 / deg[free]
    prev = np.inf
    for it in range(max_iters):
        nxt = x.copy()
        nxt[free] = (W @ x)[free] * inv_deg[free]
        change = np.max(np.abs(nxt - x)) if n else 0.0
        x = nxt
        if callback is not None:
            callback(it, x)
        rho = change / prev if prev > 0 else 0.0
        prev = change
        if change < tol and (rho <= 0.5 or (rho < 1.0 and change * rho / (1.0 - rho) < tol)):
            break
    return {
        u: LeaningScore(u, float(x[i]), _label(float(x[i]), threshold), bool(is_seed[i]))
        for i, u in enumerate(nodes)
    }


@dataclass
class SeedValidation:
    total: int
    left: int
    right: int
    unknown: int
    filtered: frozenset = field(default_factory=frozenset)

    @property
    def proportion_left(self) -> float:
        return self.left / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "left": self.left,
            "right": self.right,
            "unknown": self.unknown,
            "proportion_left": self.proportion_left,
            "retained": len(self.filtered),
        }


def validate_seed_set(seed_set: Iterable[str], leanings: Mapping[str, LeaningScore]) -> SeedValidation:
    """Tally candidate leanings; keep only right-leaning candidates."""
    counts = {"left": 0, "right": 0, "unknown": 0}
    kept = set()
    seeds = set(seed_set)
    for uid in seeds:
        lab = leanings[uid].label if uid in leanings else "unknown"
        counts[lab] += 1
        if lab == "right":
            kept.add(uid)
    return SeedValidation(len(seeds), counts["left"], counts["right"], counts["unknown"], frozenset(kept))
