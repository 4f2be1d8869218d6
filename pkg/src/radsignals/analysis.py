"""Cluster characterization and the inter-cluster retweet null model."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .corpus import UserAggregate
from .signals import SIGNAL_NAMES, UndefinedSignal, qc_tweets

STATUSES = ("active", "suspended", "deleted")


@dataclass
class PearsonResult:
    r: np.ndarray  # NaN rows/columns for zero-variance signals
    p: np.ndarray
    n: int
    names: tuple = SIGNAL_NAMES


def pearson_matrix(X, names=SIGNAL_NAMES) -> PearsonResult:
    """Pairwise Pearson correlations with two-sided t-test p-values."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two observations")
    ok = X.max(axis=0) > X.min(axis=0)  # exact test; centred constants leave float residue
    Xc = X - X.mean(axis=0)
    Xc[:, ~ok] = 0.0
    cov = Xc.T @ Xc
    var = np.diag(cov).copy()
    sd = np.sqrt(np.where(ok, var, np.nan))
    r = cov / np.outer(sd, sd)
    r = np.clip((r + r.T) / 2, -1.0, 1.0)
    np.fill_diagonal(r, np.where(ok, 1.0, np.nan))
    p = np.full((d, d), np.nan)
    if n > 2:
        df = n - 2
        with np.errstate(divide="ignore", invalid="ignore"):
            t = r * np.sqrt(df / np.maximum(1.0 - r ** 2, 0.0))
        p = 2.0 * stats.t.sf(np.abs(t), df)
        p[np.isnan(r)] = np.nan
    return PearsonResult(r, p, n, tuple(names))


# ---------------------------------------------------------------------------
# per-user characteristics


def persistence(agg: UserAggregate) -> float:
    """Share of active days with any QAnon keyword or URL."""
    if not agg.active_days:
        raise UndefinedSignal(f"{agg.user_id}: no active days")
    return len(agg.qanon_days) / len(agg.active_days)


def unique_keywords(agg: UserAggregate) -> int:
    return len(agg.keywords_used)


def retweet_ratio(agg: UserAggregate) -> float:
    if agg.total_tweets == 0:
        raise UndefinedSignal(f"{agg.user_id}: no tweets")
    return agg.n_retweets / agg.total_tweets


def mean_retweeted_qc(agg: UserAggregate, qc_map: Mapping[str, float]) -> float:
    """Retweet-weighted mean QC_tweets of retweeted users that have a score."""
    num = den = 0
    for t, c in agg.retweet_targets.items():
        if t in qc_map:
            num += c * qc_map[t]
            den += c
    if den == 0:
        raise UndefinedSignal(f"{agg.user_id}: no scoreable retweet targets")
    return num / den


def url_credibility(agg: UserAggregate) -> float:
    """(reliable - unreliable) / (reliable + unreliable) over shared URLs."""
    r, u = agg.reliable_urls, agg.unreliable_urls
    if r + u == 0:
        raise UndefinedSignal(f"{agg.user_id}: no rated URLs")
    return (r - u) / (r + u)


def qc_map(aggregates: Mapping[str, UserAggregate]) -> dict[str, float]:
    return {u: qc_tweets(a) for u, a in aggregates.items() if a.total_tweets}


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedSignal:
        return None


def user_characteristics(aggregates, users, qcs) -> dict[str, dict]:
    """Per-user values behind the retweet-ratio, persistence, retweeted-QC,
    credibility and keyword-variety distributions; undefined values are None."""
    out = {}
    for u in users:
        a = aggregates[u]
        out[u] = {
            "retweet_ratio": _maybe(retweet_ratio, a),
            "persistence": _maybe(persistence, a),
            "mean_retweeted_qc": _maybe(mean_retweeted_qc, a, qcs),
            "url_credibility": _maybe(url_credibility, a),
            "unique_keywords": unique_keywords(a),
        }
    return out


# ---------------------------------------------------------------------------
# permutation null model


@dataclass
class InteractionMatrix:
    period: str
    observed: np.ndarray
    null_mean: np.ndarray
    null_std: np.ndarray
    z: np.ndarray
    p: np.ndarray
    n_permutations: int
    rng_seed: int

    def significant(self, alpha: float = 0.05) -> np.ndarray:
        return self.p < alpha


def _edge_arrays(retweet_edges, assignments):
    nodes = sorted(assignments)
    index = {u: i for i, u in enumerate(nodes)}
    labels = np.array([assignments[u] for u in nodes], dtype=np.int64)
    src, dst, w = [], [], []
    for (a, b), c in sorted(retweet_edges.items()):
        if a in index and b in index and c > 0:
            src.append(index[a])
            dst.append(index[b])
            w.append(c)
    return labels, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(w, dtype=float)


def _counts(lab, src, dst, w, k):
    return np.bincount(lab[src] * k + lab[dst], weights=w, minlength=k * k)


def interaction_zscores(retweet_edges: Mapping[tuple[str, str], float], assignments: Mapping[str, int],
                        period: str = "all", R: int = 1000, rng_seed: int = 0, k: int | None = None,
                        workers: int = 1, permutations=None) -> InteractionMatrix:
    """Observed cluster-to-cluster retweet counts against shuffled labels.

    Iteration ``i`` permutes the clustered users with
    ``default_rng([rng_seed, i])``, so cluster sizes are fixed and results do
    not depend on ``workers``. Edges touching unclustered users are
    ignored. ``permutations`` overrides the random draws with explicit
    index permutations (used for degenerate checks).
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    labels, src, dst, w = _edge_arrays(retweet_edges, assignments)
    if k is None:
        k = int(labels.max()) + 1 if len(labels) else 0
    observed = _counts(labels, src, dst, w, k)
    n = len(labels)

    def draw(i):
        if permutations is not None:
            perm = np.asarray(permutations[i])
        else:
            perm = np.random.default_rng([rng_seed, i]).permutation(n)
        return _counts(labels[perm], src, dst, w, k)

    if permutations is not None:
        R = len(permutations)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            nulls = np.array(list(ex.map(draw, range(R))))
    else:
        nulls = np.array([draw(i) for i in range(R)])
    mean = nulls.mean(axis=0)
    std = nulls.std(axis=0)
    dev = np.abs(observed - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, (observed - mean) / np.where(std > 0, std, 1.0),
                     np.where(dev == 0, 0.0, np.nan))
    exceed = (np.abs(nulls - mean) >= dev - 1e-9 * np.maximum(1.0, dev)).sum(axis=0)
    p = (1.0 + exceed) / (R + 1.0)
    shape = (k, k)
    return InteractionMatrix(period, observed.reshape(shape), mean.reshape(shape), std.reshape(shape),
                             z.reshape(shape), p.reshape(shape), R, rng_seed)


# ---------------------------------------------------------------------------
# cluster summaries


def load_account_status(path) -> dict[str, str]:
    out = {}
    if path is None:
        return out
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            status = row["status"].strip().lower()
            if status not in STATUSES:
                raise ValueError(f"unknown account status {status!r}")
            out[row["user_id"]] = status
    return out


def five_number(values) -> dict | None:
    # sorted so the mean does not depend on iteration order
    v = np.sort(np.asarray([x for x in values if x is not None], dtype=float))
    if len(v) == 0:
        return None
    q = np.percentile(v, [0, 25, 50, 75, 100])
    return {"n": int(len(v)), "min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4]), "mean": float(v.mean())}


def cluster_summary(assignments: Mapping[str, int], aggregates, leanings, account_status: Mapping[str, str],
                    vectors=None, qcs=None, letters=None, centroids=None) -> dict:
    """Per-cluster proportions and distribution summaries (JSON-ready).

    Users missing from ``account_status`` count as active; users without a
    leaning count as not left-leaning.
    """
    if qcs is None:
        qcs = qc_map(aggregates)
    k = max(assignments.values()) + 1 if assignments else 0
    members = {c: sorted(u for u, a in assignments.items() if a == c) for c in range(k)}
    chars = user_characteristics(aggregates, sorted(assignments), qcs)
    clusters = []
    for c in range(k):
        us = members[c]
        size = len(us)
        left = sum(1 for u in us if u in leanings and leanings[u].label == "left")
        susp = sum(1 for u in us if account_status.get(u, "active") == "suspended")
        dele = sum(1 for u in us if account_status.get(u, "active") == "deleted")
        entry = {
            "cluster": c,
            "label": letters[c] if letters else str(c),
            "size": size,
            "proportion_left": left / size if size else 0.0,
            "proportion_suspended": susp / size if size else 0.0,
            "proportion_deleted": dele / size if size else 0.0,
        }
        if centroids is not None:
            entry["centroid"] = dict(zip(SIGNAL_NAMES, map(float, centroids[c])))
        if vectors is not None:
            entry["signals"] = {
                name: five_number(getattr(vectors[u], name) for u in us) for name in SIGNAL_NAMES
            }
        for key in ("retweet_ratio", "persistence", "mean_retweeted_qc", "url_credibility", "unique_keywords"):
            entry[key] = five_number(chars[u][key] for u in us)
        clusters.append(entry)
    return {"k": k, "population": len(assignments), "clusters": clusters}


def weekly_qc(aggregates: Mapping[str, UserAggregate], n_weeks: int, weekly_min_tweets: int = 10) -> list[dict]:
    """Per week: users with more than ``weekly_min_tweets`` tweets and QC_tweets > 0,
    plus the quartiles of their weekly QC_tweets."""
    rows = []
    for w in range(n_weeks):
        vals = []
        for a in aggregates.values():
            n = a.tweets_in_week(w)
            if n > weekly_min_tweets and a.hits_in_week(w) > 0:
                vals.append(a.hits_in_week(w) / n)
        summ = five_number(vals) or {"n": 0}
        rows.append({"week": w, "users_qc_positive": len(vals),
                     **{k: summ.get(k) for k in ("min", "q1", "median", "q3", "max", "mean")}})
    return rows
