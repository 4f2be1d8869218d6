"""End-to-end run: ingest -> filter -> seeds -> validate -> lexicon ->
signals -> cluster -> analyze -> report.

Every stage writes its files into the output directory and records them in
``manifest.json`` under a key hashed from the configuration it depends on
and the keys of the stages before it. A rerun whose key and file digests
still match loads the stage from disk instead of recomputing it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import platform
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (cluster_summary, interaction_zscores, load_account_status, pearson_matrix, qc_map,
                       user_characteristics, weekly_qc)
from .clustering import centroid_neighbors, cluster_letters, normalize_rows, select_k, tsne_embed
from .corpus import (AnalysisWindow, aggregates_report, filter_active, ingest, load_aggregates,
                     read_jsonl, retweet_edges)
from .lexicon import CorpusCounts, Lexicon, build_lexicon, weighted_log_odds
from .matchers import (DomainList, KeywordList, MatcherSet, _data_path, lexicon_token_filter,
                       load_outlet_bias, load_stopwords)
from .seeds import SeedConfig, infer_leanings, outlet_seed_scores, select_persistent, validate_seed_set
from .signals import SIGNAL_NAMES, SignalVector, feature_matrix, to_matrix, write_signals_csv

log = logging.getLogger(__name__)

STAGES = ("ingest", "filter", "seeds", "validate", "lexicon", "signals", "cluster", "analyze", "report")
PERIODS = ("all", "pre", "post")
MANIFEST = "manifest.json"

# files each stage declares
OUTPUTS = {
    "ingest": ("aggregates.jsonl", "ingest_report.json"),
    "filter": ("active_users.txt",),
    "seeds": ("seed_candidates.txt",),
    "validate": ("leanings.csv", "seeds.txt", "seed_validation.json"),
    "lexicon": ("lexicon.tsv", "lexicon_report.json"),
    "signals": ("signals.csv", "pearson.csv"),
    "cluster": ("k_selection.csv", "assignments.csv", "centroids.csv", "embedding.csv"),
    "analyze": ("cluster_summary.json", "user_characteristics.csv", "weekly_qc.csv")
    + tuple(f"interactions_{p}_{m}.csv" for p in PERIODS for m in ("observed", "z", "p")),
    "report": ("report.json", "report.txt"),
}


class ConfigError(ValueError):
    """Invalid configuration or a missing input/resource file."""


class DataError(ValueError):
    """The data cannot support a stage (e.g. no seeds, too few users)."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException, manifest: dict):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest = manifest


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    input: list = field(default_factory=list)
    out: str = "run"
    start: str = "2020-06-20"
    n_weeks: int = 11
    intervention_date: str = "2020-07-21"
    seed_weeks: int = 5
    min_tweets: int = 20
    weekly_min_tweets: int = 10
    alpha: float = 0.01
    top_fraction: float = 0.005
    rank_by: str = "z"
    k_range: tuple = (2, 20)
    n_init: int = 10
    silhouette_sample: int | None = None
    permutations: int = 1000
    rng_seed: int = 0
    distance: str = "euclidean"
    standardize: bool = False
    threads: int = 1
    exclude_seeds: bool = True
    quotes_as_retweets: bool = False
    propagation_tol: float = 1e-6
    tsne_per_cluster: int = 200
    tsne_iters: int = 1000
    tsne_perplexity: float = 30.0
    # resources; None means the bundled list (or an empty one where nothing is bundled)
    keywords: str | None = None
    qanon_domains: str | None = None
    stopwords: str | None = None
    outlet_bias: str | None = None
    reliable_domains: str | None = None
    unreliable_domains: str | None = None
    account_status: str | None = None

    RESOURCES = ("keywords", "qanon_domains", "stopwords", "outlet_bias", "reliable_domains",
                 "unreliable_domains", "account_status")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if isinstance(d.get("input"), str):
            d["input"] = [d["input"]]
        if base_dir is not None:
            # relative paths in a config file are relative to that file
            for key in ("input",):
                d[key] = [str(Path(base_dir, p)) for p in d.get(key, [])]
            for key in cls.RESOURCES:
                if d.get(key):
                    d[key] = str(Path(base_dir, d[key]))
        if "k_range" in d:
            d["k_range"] = tuple(d["k_range"])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["k_range"] = list(self.k_range)
        d["input"] = list(self.input)
        return d

    def window(self) -> AnalysisWindow:
        try:
            return AnalysisWindow(date.fromisoformat(self.start), self.n_weeks,
                                  date.fromisoformat(self.intervention_date), self.seed_weeks)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad analysis window: {e}") from None

    def validate(self):
        """Check ranges and that every referenced file exists."""
        self.window()
        if not self.input:
            raise ConfigError("no input files given")
        for p in self.input:
            if not Path(p).is_file():
                raise ConfigError(f"input file not found: {p}")
        for key in self.RESOURCES:
            p = getattr(self, key)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{key} file not found: {p}")
        checks = [
            (self.min_tweets >= 1, "min_tweets must be >= 1"),
            (self.weekly_min_tweets >= 1, "weekly_min_tweets must be >= 1"),
            (self.alpha > 0, "alpha must be > 0"),
            (0 < self.top_fraction < 1, "top_fraction must lie in (0, 1)"),
            (self.rank_by in ("z", "delta"), "rank_by must be 'z' or 'delta'"),
            (len(self.k_range) == 2 and 2 <= self.k_range[0] <= self.k_range[1], "k_range must be [lo, hi] with 2 <= lo <= hi"),
            (self.n_init >= 1, "n_init must be >= 1"),
            (self.permutations >= 1, "permutations must be >= 1"),
            (self.distance in ("euclidean", "cosine"), "distance must be 'euclidean' or 'cosine'"),
            (self.threads >= 1, "threads must be >= 1"),
            (self.propagation_tol > 0, "propagation_tol must be > 0"),
            (self.tsne_per_cluster >= 0, "tsne_per_cluster must be >= 0"),
            (self.tsne_iters >= 1, "tsne_iters must be >= 1"),
            (self.tsne_perplexity > 0, "tsne_perplexity must be > 0"),
            (self.silhouette_sample is None or self.silhouette_sample >= 2, "silhouette_sample must be >= 2"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def matchers(self) -> MatcherSet:
        def domains(path):
            return DomainList.from_file(path) if path else DomainList(())

        try:
            kw = KeywordList.from_file(self.keywords) if self.keywords else None
            q = DomainList.from_file(self.qanon_domains) if self.qanon_domains else None
            base = MatcherSet.defaults()
            return MatcherSet(
                kw or base.keywords,
                q or base.qanon_domains,
                domains(self.reliable_domains),
                domains(self.unreliable_domains),
                load_outlet_bias(self.outlet_bias) if self.outlet_bias else DomainList(()),
                load_stopwords(self.stopwords),
            )
        except (ValueError, KeyError) as e:
            raise ConfigError(f"bad resource file: {e}") from None


# which config fields feed each stage's cache key
_STAGE_PARAMS = {
    "ingest": ("start", "n_weeks", "intervention_date", "seed_weeks", "quotes_as_retweets"),
    "filter": ("min_tweets",),
    "seeds": ("weekly_min_tweets",),
    "validate": ("propagation_tol",),
    "lexicon": ("alpha", "top_fraction", "rank_by"),
    "signals": ("exclude_seeds",),
    "cluster": ("k_range", "n_init", "silhouette_sample", "rng_seed", "distance", "standardize", "tsne_per_cluster",
                "tsne_iters", "tsne_perplexity"),
    "analyze": ("permutations", "rng_seed", "weekly_min_tweets"),
    "report": (),
}
_STAGE_RESOURCES = {
    "ingest": ("keywords", "qanon_domains", "outlet_bias", "reliable_domains", "unreliable_domains"),
    "lexicon": ("stopwords",),
    "analyze": ("account_status",),
}


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _resource_path(cfg: RunConfig, key: str):
    p = getattr(cfg, key)
    if p is None and key in ("keywords", "qanon_domains", "stopwords"):
        return _data_path(f"{key}.txt")
    return p


# ---------------------------------------------------------------------------
# small writers


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_json(path: Path, obj):
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=True) + "\n")


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _write_matrix(path: Path, M, labels):
    _write_csv(path, [""] + list(labels), [[a] + [_fmt(v) for v in row] for a, row in zip(labels, M)])


# ---------------------------------------------------------------------------
# the run


class Pipeline:
    """Stateful runner; ``run(until=...)`` executes stages in order."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.cfg = config
        self.out = Path(config.out)
        self.window = config.window()
        self.state: dict = {}
        self.keys: dict = {}
        self._previous = self._load_previous_manifest()
        inputs = {str(p): file_digest(p) for p in config.input}
        resources = {}
        for key in RunConfig.RESOURCES:
            p = _resource_path(config, key)
            resources[key] = {"path": str(p), "sha256": file_digest(p)} if p else None
        self.manifest = {
            "package_version": __version__,
            "library_versions": {"numpy": np.__version__, "scipy": scipy.__version__,
                                 "python": platform.python_version()},
            "config": config.to_dict(),
            "inputs": inputs,
            "resources": resources,
            "seeds": {"rng_seed": config.rng_seed, "kmeans": config.rng_seed, "silhouette": config.rng_seed,
                      "tsne": config.rng_seed, "permutations": f"default_rng([{config.rng_seed}, i])"},
            "methods": {
                "propagation": "undirected weighted graph, synchronous (Jacobi) updates, outlet seeds clamped at +-1",
                "k_selection": "elbow (max second difference of inertia) unless its silhouette is >5% below the best",
                "lexicon_ranking": config.rank_by,
                "distance": config.distance,
                "standardize": config.standardize,
                "seeds_in_clustering": "excluded" if config.exclude_seeds else "included",
            },
            "stages": {},
            "drops": {},
            "timings": {},
        }

    # -- manifest / cache -----------------------------------------------
    def _load_previous_manifest(self) -> dict:
        p = self.out / MANIFEST
        if not p.is_file():
            return {}
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except ValueError:
            return {}

    def _stage_key(self, stage: str) -> str:
        i = STAGES.index(stage)
        payload = {
            "stage": stage,
            "version": __version__,
            "params": {k: self.cfg.to_dict()[k] for k in _STAGE_PARAMS[stage]},
            "resources": {k: self.manifest["resources"][k] and self.manifest["resources"][k]["sha256"]
                          for k in _STAGE_RESOURCES.get(stage, ())},
            "upstream": self.keys.get(STAGES[i - 1]) if i else sorted(self.manifest["inputs"].items()),
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def _cached(self, stage: str, key: str) -> bool:
        prev = self._previous.get("stages", {}).get(stage)
        if not prev or prev.get("key") != key:
            return False
        for name, digest in prev.get("outputs", {}).items():
            p = self.out / name
            if not p.is_file() or file_digest(p) != digest:
                return False
        return set(prev.get("outputs", {})) == set(OUTPUTS[stage])

    def write_manifest(self):
        _write_json(self.out / MANIFEST, self.manifest)

    def run(self, until: str = "report") -> dict:
        if until not in STAGES:
            raise ConfigError(f"unknown stage {until!r}")
        self.out.mkdir(parents=True, exist_ok=True)
        for stage in STAGES[: STAGES.index(until) + 1]:
            key = self._stage_key(stage)
            self.keys[stage] = key
            t0 = time.perf_counter()
            cached = self._cached(stage, key)
            try:
                if cached:
                    getattr(self, f"_load_{stage}")()
                    self.manifest["stages"][stage] = self._previous["stages"][stage]
                    if stage == "ingest":
                        self.manifest["drops"] = self._previous.get("drops", {})
                else:
                    getattr(self, f"_run_{stage}")()
                    self.manifest["stages"][stage] = {
                        "key": key,
                        "outputs": {n: file_digest(self.out / n) for n in OUTPUTS[stage]},
                    }
            except Exception as e:  # noqa: BLE001 - re-raised with stage context
                self.manifest["failed_stage"] = {"stage": stage, "error": f"{type(e).__name__}: {e}"}
                self.write_manifest()
                raise StageError(stage, e, self.manifest) from e
            self.manifest["timings"][stage] = {"seconds": round(time.perf_counter() - t0, 3), "cached": cached}
            log.info("%s %s in %.1fs", stage, "loaded" if cached else "done", time.perf_counter() - t0)
            self.write_manifest()
        return self.manifest

    # -- ingest -----------------------------------------------------------
    def _run_ingest(self):
        dropped, diag = Counter(), Counter()
        aggs = ingest(read_jsonl(*self.cfg.input), self.window, self.cfg.matchers(), dropped,
                      quotes_as_retweets=self.cfg.quotes_as_retweets, diagnostics=diag)
        if not aggs:
            raise DataError("no usable records in the analysis window")
        _write_text(self.out / "aggregates.jsonl", aggregates_report(aggs))
        report = {"users": len(aggs), "tweets": sum(a.total_tweets for a in aggs.values()),
                  "dropped": dict(sorted(dropped.items())), "diagnostics": dict(sorted(diag.items()))}
        _write_json(self.out / "ingest_report.json", report)
        self.manifest["drops"] = report["dropped"]
        self.state["aggregates"] = aggs

    def _load_ingest(self):
        with open(self.out / "aggregates.jsonl", encoding="utf-8") as fh:
            self.state["aggregates"] = load_aggregates(fh)

    # -- filter -----------------------------------------------------------
    def _run_filter(self):
        active = filter_active(self.state["aggregates"], self.cfg.min_tweets)
        if not active:
            raise DataError(f"no user has >= {self.cfg.min_tweets} tweets")
        _write_text(self.out / "active_users.txt", "".join(u + "\n" for u in sorted(active)))
        self.state["active"] = active

    def _load_filter(self):
        self.state["active"] = set((self.out / "active_users.txt").read_text(encoding="utf-8").split())

    def _active_aggs(self):
        aggs = self.state["aggregates"]
        return {u: aggs[u] for u in sorted(self.state["active"])}

    # -- seeds ------------------------------------------------------------
    def _run_seeds(self):
        conf = SeedConfig(self.cfg.weekly_min_tweets, self.cfg.seed_weeks)
        cand = select_persistent(self._active_aggs(), self.window, conf)
        _write_text(self.out / "seed_candidates.txt", "".join(u + "\n" for u in sorted(cand)))
        self.state["candidates"] = cand

    def _load_seeds(self):
        self.state["candidates"] = set((self.out / "seed_candidates.txt").read_text(encoding="utf-8").split())

    # -- validate ---------------------------------------------------------
    def _run_validate(self):
        aggs = self.state["aggregates"]
        edges = retweet_edges(aggs, sources=self.state["active"])
        leanings = infer_leanings(edges, outlet_seed_scores(aggs), tol=self.cfg.propagation_tol)
        val = validate_seed_set(self.state["candidates"], leanings)
        if not val.filtered:
            raise DataError(f"no right-leaning persistent seed users ({val.total} candidates)")
        _write_csv(self.out / "leanings.csv", ["user_id", "score", "label", "is_seed_label"],
                   [[u, repr(l.score), l.label, int(l.is_seed_label)] for u, l in sorted(leanings.items())])
        _write_text(self.out / "seeds.txt", "".join(u + "\n" for u in sorted(val.filtered)))
        _write_json(self.out / "seed_validation.json", val.to_dict())
        self.state.update(leanings=leanings, seeds=val.filtered, validation=val.to_dict())

    def _load_validate(self):
        from .seeds import LeaningScore

        rows = _read_csv(self.out / "leanings.csv")
        self.state["leanings"] = {r["user_id"]: LeaningScore(r["user_id"], float(r["score"]), r["label"],
                                                             bool(int(r["is_seed_label"]))) for r in rows}
        self.state["seeds"] = frozenset((self.out / "seeds.txt").read_text(encoding="utf-8").split())
        self.state["validation"] = json.loads((self.out / "seed_validation.json").read_text(encoding="utf-8"))

    # -- lexicon ----------------------------------------------------------
    def _run_lexicon(self):
        aggs, active, seeds = self._active_aggs(), self.state["active"], self.state["seeds"]
        seed_c = CorpusCounts.from_users(aggs, sorted(seeds))
        bg_c = CorpusCounts.from_users(aggs, sorted(active - seeds))
        try:
            entries = weighted_log_odds(seed_c, bg_c, self.cfg.alpha)
        except ValueError as e:
            raise DataError(f"cannot contrast seed and background corpora: {e}") from None
        stop = load_stopwords(self.cfg.stopwords)
        lex = build_lexicon(entries, self.cfg.top_fraction, lambda t: lexicon_token_filter(t, stop),
                            rank_by=self.cfg.rank_by)
        lex.write_tsv(self.out / "lexicon.tsv")
        _write_json(self.out / "lexicon_report.json", {
            "vocabulary_size": lex.vocabulary_size, "top_fraction": self.cfg.top_fraction,
            "candidates": lex.n_candidates, "retained": len(lex), "hashtags": lex.hashtag_count,
            "seed_tokens": seed_c.total, "background_tokens": bg_c.total})
        self.state["lexicon"] = lex

    def _load_lexicon(self):
        self.state["lexicon"] = Lexicon.read_tsv(self.out / "lexicon.tsv")

    # -- signals ----------------------------------------------------------
    def _run_signals(self):
        aggs, seeds = self._active_aggs(), self.state["seeds"]
        pool = {u: a for u, a in aggs.items() if not (self.cfg.exclude_seeds and u in seeds)}
        m = self.cfg.matchers()
        vectors = feature_matrix(pool, seeds, self.state["lexicon"], m.keywords, m.qanon_domains)
        if len(vectors) < 2:
            raise DataError("fewer than two users have a complete signal vector")
        write_signals_csv(self.out / "signals.csv", aggs, vectors)
        _, X = to_matrix(vectors)
        pr = pearson_matrix(X)
        rows = [[a, b, _fmt(pr.r[i, j]), _fmt(pr.p[i, j])]
                for i, a in enumerate(SIGNAL_NAMES) for j, b in enumerate(SIGNAL_NAMES)]
        _write_csv(self.out / "pearson.csv", ["signal_a", "signal_b", "r", "p"], rows)
        self.state["vectors"] = vectors
        self.state["pearson"] = pr

    def _load_signals(self):
        rows = _read_csv(self.out / "signals.csv")
        self.state["vectors"] = {r["user_id"]: SignalVector(*(float(r[n]) for n in SIGNAL_NAMES)) for r in rows}
        _, X = to_matrix(self.state["vectors"])
        self.state["pearson"] = pearson_matrix(X)

    # -- cluster ----------------------------------------------------------
    def _run_cluster(self):
        cfg = self.cfg
        users, X = to_matrix(self.state["vectors"])
        Xc = normalize_rows(X) if cfg.distance == "cosine" else X
        if cfg.standardize:
            sd = Xc.std(axis=0)
            Xc = (Xc - Xc.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
        lo, hi = cfg.k_range
        if len(X) <= lo:
            raise DataError(f"{len(X)} users cannot be split into {lo}+ clusters")
        hi = min(hi, len(X) - 1)
        curve = select_k(Xc, range(lo, hi + 1), rng_seed=cfg.rng_seed, n_init=cfg.n_init,
                         silhouette_sample=cfg.silhouette_sample)
        model = curve.models[curve.chosen_k]
        # centroids reported in raw signal units, whatever space k-means ran in
        raw = np.array([X[model.labels == c].mean(axis=0) for c in range(model.k)])
        # renumber clusters so index 0 is letter A
        letters = cluster_letters(raw)
        order = sorted(range(model.k), key=lambda c: letters[c])
        remap = np.empty(model.k, dtype=np.int64)
        remap[order] = np.arange(model.k)
        labels = remap[model.labels]
        centroids = raw[order]
        names = [letters[c] for c in order]
        model.labels, model.centroids = labels, model.centroids[order]

        _write_csv(self.out / "k_selection.csv", ["k", "inertia", "silhouette", "is_elbow", "is_chosen"],
                   [[k, _fmt(i), _fmt(s), int(k == curve.elbow), int(k == curve.chosen_k)]
                    for k, i, s in curve.rows()])
        _write_csv(self.out / "assignments.csv", ["user_id", "cluster", "label"],
                   [[u, int(c), names[c]] for u, c in zip(users, labels)])
        _write_csv(self.out / "centroids.csv", ["cluster", "label", "size", *SIGNAL_NAMES],
                   [[c, names[c], int((labels == c).sum()), *map(_fmt, centroids[c])] for c in range(model.k)])
        self._embed(model, Xc, users, names)
        self.state.update(assignments=dict(zip(users, map(int, labels))), letters=names, centroids=centroids,
                          curve={"elbow": curve.elbow, "chosen_k": curve.chosen_k})

    def _embed(self, model, X, users, names):
        rows = []
        if self.cfg.tsne_per_cluster > 0:
            near = centroid_neighbors(model, X, self.cfg.tsne_per_cluster, users)
            idx = sorted(i for members in near.values() for i in members)
            n = len(idx)
            perplexity = min(self.cfg.tsne_perplexity, (n - 1) / 3.0)
            if n >= 4:
                emb = tsne_embed(X[idx], rng_seed=self.cfg.rng_seed, perplexity=perplexity,
                                 iters=self.cfg.tsne_iters)
                self.manifest["embedding"] = {"points": n, "perplexity": perplexity,
                                              "kl_divergence": emb.kl_divergence}
                rows = [[users[i], int(model.labels[i]), names[model.labels[i]], _fmt(x), _fmt(y)]
                        for i, (x, y) in zip(idx, emb.coords)]
        _write_csv(self.out / "embedding.csv", ["user_id", "cluster", "label", "x", "y"], rows)

    def _load_cluster(self):
        rows = _read_csv(self.out / "assignments.csv")
        self.state["assignments"] = {r["user_id"]: int(r["cluster"]) for r in rows}
        cents = _read_csv(self.out / "centroids.csv")
        self.state["letters"] = [r["label"] for r in cents]
        self.state["centroids"] = np.array([[float(r[n]) for n in SIGNAL_NAMES] for r in cents])
        ks = _read_csv(self.out / "k_selection.csv")
        self.state["curve"] = {"elbow": next(int(r["k"]) for r in ks if r["is_elbow"] == "1"),
                               "chosen_k": next(int(r["k"]) for r in ks if r["is_chosen"] == "1")}
        prev = self._previous.get("embedding")
        if prev:
            self.manifest["embedding"] = prev

    # -- analyze ----------------------------------------------------------
    def _run_analyze(self):
        cfg = self.cfg
        aggs = self.state["aggregates"]
        assign = self.state["assignments"]
        letters = self.state["letters"]
        status = load_account_status(cfg.account_status)
        qcs = qc_map(aggs)
        summary = cluster_summary(assign, aggs, self.state["leanings"], status, vectors=self.state["vectors"],
                                  qcs=qcs, letters=letters, centroids=self.state["centroids"])
        k = len(letters)
        for period in PERIODS:
            edges = retweet_edges(aggs, sources=assign.keys(), period=period)
            im = interaction_zscores(edges, assign, period=period, R=cfg.permutations, rng_seed=cfg.rng_seed,
                                     k=k, workers=cfg.threads)
            for name, M in (("observed", im.observed), ("z", im.z), ("p", im.p)):
                _write_matrix(self.out / f"interactions_{period}_{name}.csv", M, letters)
            summary.setdefault("interactions", {})[period] = {
                "significant_cells": int(im.significant().sum()),
                "diagonal_z": [_fmt(v) for v in np.diag(im.z)],
            }
        _write_json(self.out / "cluster_summary.json", summary)
        chars = user_characteristics(aggs, sorted(assign), qcs)
        cols = ["retweet_ratio", "persistence", "mean_retweeted_qc", "url_credibility", "unique_keywords"]
        _write_csv(self.out / "user_characteristics.csv", ["user_id", "cluster", "label", *cols],
                   [[u, assign[u], letters[assign[u]], *(_fmt(chars[u][c]) for c in cols)] for u in sorted(assign)])
        wq = weekly_qc(self._active_aggs(), self.window.n_weeks, cfg.weekly_min_tweets)
        wcols = ["week", "users_qc_positive", "min", "q1", "median", "q3", "max", "mean"]
        _write_csv(self.out / "weekly_qc.csv", wcols, [[_fmt(r[c]) for c in wcols] for r in wq])
        self.state["summary"] = summary

    def _load_analyze(self):
        self.state["summary"] = json.loads((self.out / "cluster_summary.json").read_text(encoding="utf-8"))

    # -- report -----------------------------------------------------------
    def _run_report(self):
        summary = self.state["summary"]
        pr = self.state["pearson"]
        ingest_rep = json.loads((self.out / "ingest_report.json").read_text(encoding="utf-8"))
        lex_rep = json.loads((self.out / "lexicon_report.json").read_text(encoding="utf-8"))
        report = {
            "users": ingest_rep["users"],
            "tweets": ingest_rep["tweets"],
            "dropped": ingest_rep["dropped"],
            "active_users": len(self.state["active"]),
            "seed_candidates": len(self.state["candidates"]),
            "seed_validation": self.state["validation"],
            "lexicon": lex_rep,
            "clustered_users": summary["population"],
            "k": self.state["curve"],
            "clusters": [{key: c[key] for key in ("label", "size", "proportion_left", "proportion_suspended",
                                                  "proportion_deleted", "centroid")} for c in summary["clusters"]],
            "pearson_r": {f"{a}~{b}": _fmt(pr.r[i, j]) for i, a in enumerate(SIGNAL_NAMES)
                          for j, b in enumerate(SIGNAL_NAMES) if i < j},
        }
        _write_json(self.out / "report.json", report)
        lines = [
            f"users {report['users']}  tweets {report['tweets']}  active {report['active_users']}",
            f"seed candidates {report['seed_candidates']}  retained {self.state['validation']['retained']}"
            f"  left share {self.state['validation']['proportion_left']:.3f}",
            f"lexicon {lex_rep['retained']} of {lex_rep['candidates']} candidates "
            f"(|V|={lex_rep['vocabulary_size']}, {lex_rep['hashtags']} hashtags)",
            f"clustered users {report['clustered_users']}  elbow k={report['k']['elbow']}"
            f"  chosen k={report['k']['chosen_k']}",
            "",
            f"{'cluster':>7} {'size':>6} " + " ".join(f"{n:>10}" for n in SIGNAL_NAMES)
            + f" {'left':>6} {'susp':>6} {'del':>6}",
        ]
        for c in report["clusters"]:
            cen = c["centroid"]
            lines.append(f"{c['label']:>7} {c['size']:>6} " + " ".join(f"{cen[n]:>10.4f}" for n in SIGNAL_NAMES)
                         + f" {c['proportion_left']:>6.3f} {c['proportion_suspended']:>6.3f}"
                         f" {c['proportion_deleted']:>6.3f}")
        _write_text(self.out / "report.txt", "\n".join(lines) + "\n")

    def _load_report(self):
        pass


def run_pipeline(config: RunConfig, until: str = "report") -> Path:
    """Run (or resume) every stage up to ``until``; returns the output directory."""
    Pipeline(config).run(until)
    return Path(config.out)


def comparable_manifest(path) -> dict:
    """Manifest without the fields that legitimately differ between reruns."""
    m = json.loads(Path(path).read_text(encoding="utf-8"))
    m.pop("timings", None)
    # where the run was written and how many workers it used do not change results
    m["config"].pop("out", None)
    m["config"].pop("threads", None)
    return m


def output_digests(out_dir) -> dict:
    """sha256 of every output file; the manifest is digested without timings."""
    out = {}
    for p in sorted(Path(out_dir).iterdir()):
        if not p.is_file():
            continue
        if p.name == MANIFEST:
            blob = json.dumps(comparable_manifest(p), sort_keys=True).encode()
            out[p.name] = hashlib.sha256(blob).hexdigest()
        else:
            out[p.name] = file_digest(p)
    return out


def default_threads() -> int:
    return max(1, min(4, os.cpu_count() or 1))
