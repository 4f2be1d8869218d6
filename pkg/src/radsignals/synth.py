"""Synthetic tweet corpora with planted behavioural populations.

Each population fixes per-tweet rates (QAnon keywords and URLs, outlet
links, credibility-rated links), a retweet-target preference, how much of
its vocabulary comes from the promoters' planted words, and profile
templates. The generator writes a JSON-lines stream plus the ground truth
and resource files the pipeline needs, all reproducible from one seed.
"""

from __future__ import annotations

import csv
import gzip
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .corpus import KINDS, AnalysisWindow
from .matchers import load_stopwords

_KEYWORDS = ("wwg1wga", "#obamagate", "#qanon", "#savethechildren", "deepstate", "thegreatawakening",
             "wgaworldwide", "#qarmy", "#pizzagate", "#taketheoath")
_QANON_DOMAINS = ("qanon.pub", "qdrop.pub", "operationq.pub", "x22report.com", "voat.co", "qcon.live")
_RELIABLE = ("apnews.com", "reuters.com", "nytimes.com", "npr.org", "bbc.com", "wsj.com")
_UNRELIABLE = ("infowars.com", "thegatewaypundit.com", "naturalnews.com", "zerohedge.com", "beforeitsnews.com")
_LEFT_OUTLETS = ("motherjones.com", "huffpost.com", "msnbc.com", "thenation.com")
_RIGHT_OUTLETS = ("breitbart.com", "foxnews.com", "dailywire.com", "oann.com")
_EMOJI = ("\U0001F64F", "\U0001F449", "\U0001F438", "\U0001F1FA\U0001F1F8", "❤", "\U0001F525")
_SYLLABLES = ("ka", "lo", "mi", "ne", "ru", "ta", "vo", "shi", "den", "bar", "tel", "qui", "pon", "sar",
              "gri", "mol", "fen", "dra", "zu", "wex", "pli", "con", "mar", "tis")


@dataclass
class Population:
    name: str
    n_users: int
    tweets_per_week: float
    kind_mix: dict = field(default_factory=lambda: {"original": 0.35, "reply": 0.1, "quote": 0.05, "retweet": 0.5})
    keyword_rate: float = 0.0  # keywords per tweet, any kind
    qanon_url_rate: float = 0.0
    reliable_url_rate: float = 0.0
    unreliable_url_rate: float = 0.0
    outlet_url_rate: float = 0.05
    leaning: str = "right"
    lexicon_rate: float = 0.0  # share of words drawn from the planted promoter vocabulary
    words_per_tweet: int = 12
    emoji_rate: float = 0.0
    promoter_retweet_share: float = 0.0
    own_retweet_share: float = 0.0
    profile_templates: list = field(default_factory=lambda: [""])
    active_weeks: tuple | None = None  # [first, last) week; None = whole window
    suspended_rate: float = 0.0
    deleted_rate: float = 0.0
    is_promoter: bool = False

    def validate(self):
        rates = [self.tweets_per_week, self.keyword_rate, self.qanon_url_rate, self.reliable_url_rate,
                 self.unreliable_url_rate, self.outlet_url_rate, self.emoji_rate]
        probs = [self.lexicon_rate, self.promoter_retweet_share, self.own_retweet_share,
                 self.suspended_rate, self.deleted_rate]
        if self.n_users < 0 or any(r < 0 for r in rates) or self.words_per_tweet < 0:
            raise ValueError(f"population {self.name!r}: negative size or rate")
        if any(not 0 <= p <= 1 for p in probs):
            raise ValueError(f"population {self.name!r}: probability outside [0, 1]")
        if self.promoter_retweet_share + self.own_retweet_share > 1:
            raise ValueError(f"population {self.name!r}: retweet shares exceed 1")
        if self.suspended_rate + self.deleted_rate > 1:
            raise ValueError(f"population {self.name!r}: status rates exceed 1")
        if set(self.kind_mix) - set(KINDS) or any(v < 0 for v in self.kind_mix.values()) \
                or sum(self.kind_mix.values()) <= 0:
            raise ValueError(f"population {self.name!r}: bad kind_mix")
        if self.leaning not in ("left", "right", "none"):
            raise ValueError(f"population {self.name!r}: leaning must be left/right/none")


@dataclass
class SynthSpec:
    populations: list
    start: str = "2020-06-20"
    n_weeks: int = 11
    intervention_date: str = "2020-07-21"
    seed_weeks: int = 5
    vocabulary_size: int = 5000
    promoter_vocabulary_size: int = 15
    stopword_rate: float = 0.25
    mention_rate: float = 0.2
    duplicate_rate: float = 0.0
    malformed_rate: float = 0.0

    def window(self) -> AnalysisWindow:
        return AnalysisWindow(date.fromisoformat(self.start), self.n_weeks,
                              date.fromisoformat(self.intervention_date), self.seed_weeks)

    def validate(self):
        for p in self.populations:
            p.validate()
        self.window()
        names = [p.name for p in self.populations]
        if len(set(names)) != len(names):
            raise ValueError("population names must be unique")
        if self.vocabulary_size < 1 or self.promoter_vocabulary_size < 0:
            raise ValueError("vocabulary sizes must be positive")
        for r in (self.stopword_rate, self.mention_rate, self.duplicate_rate, self.malformed_rate):
            if not 0 <= r <= 1:
                raise ValueError("rates must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["populations"] = [Population(**{**p, "active_weeks": tuple(p["active_weeks"]) if p.get("active_weeks") else None})
                            for p in d["populations"]]
        return cls(**d)


def make_vocabulary(n: int, rng: np.random.Generator, exclude=()) -> list[str]:
    banned = set(exclude)
    words, seen = [], set()
    while len(words) < n:
        k = int(rng.integers(2, 5))
        w = "".join(_SYLLABLES[i] for i in rng.integers(0, len(_SYLLABLES), size=k))
        if w not in seen and w not in banned:
            seen.add(w)
            words.append(w)
    return words


@dataclass
class SynthCorpus:
    records: list  # dicts in the JSON-lines schema
    ground_truth: dict  # user_id -> population name
    account_status: dict  # user_id -> status
    promoter_vocabulary: list
    spec: SynthSpec


def synth_corpus(spec: SynthSpec, rng_seed: int = 0) -> SynthCorpus:
    spec.validate()
    rng = np.random.default_rng(rng_seed)
    stop = sorted(load_stopwords())
    kw_plain = {k.lstrip("#") for k in _KEYWORDS}
    vocab = make_vocabulary(spec.vocabulary_size + spec.promoter_vocabulary_size, rng,
                            exclude=set(stop) | kw_plain)
    promoter_vocab = vocab[:spec.promoter_vocabulary_size]
    background = np.array(vocab[spec.promoter_vocabulary_size:])
    zipf = 1.0 / np.arange(1, len(background) + 1)
    zipf_cdf = np.cumsum(zipf / zipf.sum())

    window = spec.window()
    start_ts = int(datetime(window.start.year, window.start.month, window.start.day, tzinfo=timezone.utc).timestamp())
    week_s = 7 * 86400

    users, pops = [], []
    for p in spec.populations:
        for _ in range(p.n_users):
            users.append(f"u{len(users):06d}")
            pops.append(p)
    ground_truth = {u: p.name for u, p in zip(users, pops)}
    by_pop = {p.name: [u for u, q in zip(users, pops) if q is p] for p in spec.populations}
    promoters = [u for u, p in zip(users, pops) if p.is_promoter]
    general = [u for u, p in zip(users, pops) if not p.is_promoter] or users
    promoter_index = {v: i for i, v in enumerate(promoters)}
    general_index = {v: i for i, v in enumerate(general)}
    promoter_arr = np.array(promoter_vocab, dtype=object)
    stop_arr = np.array(stop, dtype=object)
    background = background.astype(object)

    status = {}
    for u, p in zip(users, pops):
        r = rng.random()
        if r < p.suspended_rate:
            status[u] = "suspended"
        elif r < p.suspended_rate + p.deleted_rate:
            status[u] = "deleted"

    records = []
    tid = 0
    for u, p in zip(users, pops):
        w0, w1 = p.active_weeks or (0, spec.n_weeks)
        n_weeks = max(w1 - w0, 0)
        n = int(rng.poisson(p.tweets_per_week * n_weeks)) if n_weeks else 0
        if n == 0:
            continue
        kinds = list(p.kind_mix)
        probs = np.array([p.kind_mix[k] for k in kinds], dtype=float)
        kind_idx = rng.choice(len(kinds), size=n, p=probs / probs.sum())
        times = start_ts + w0 * week_s + rng.integers(0, n_weeks * week_s, size=n)
        profiles = p.profile_templates or [""]
        profile = profiles[int(rng.integers(len(profiles)))]
        outlets = _RIGHT_OUTLETS if p.leaning == "right" else _LEFT_OUTLETS
        own = by_pop[p.name]
        own_index = {v: i for i, v in enumerate(own)}
        # per-user batches of draws; the tweet loop below only assembles them
        W = p.words_per_tweet
        stopped = rng.random((n, W)) < spec.stopword_rate
        bg = np.minimum(np.searchsorted(zipf_cdf, rng.random((n, W))), len(background) - 1)
        word_grid = np.where(stopped, stop_arr[rng.integers(len(stop_arr), size=(n, W))], background[bg])
        if len(promoter_arr):
            lex = rng.random((n, W)) < p.lexicon_rate
            word_grid = np.where(lex, promoter_arr[rng.integers(len(promoter_arr), size=(n, W))], word_grid)
        word_rows = word_grid.tolist()
        n_kw = rng.poisson(p.keyword_rate, size=n)
        n_emoji = rng.poisson(p.emoji_rate, size=n)
        mention = rng.random(n) < spec.mention_rate
        mention_to = rng.integers(len(users), size=n)
        decorate = rng.random(n) < 0.5
        punct = rng.integers(3, size=n)
        rt_draw = rng.random(n)
        stamps = np.datetime_as_string(times.astype("datetime64[s]"), unit="s").tolist()
        url_sets = [(d, r) for d, r in ((_QANON_DOMAINS, p.qanon_url_rate), (_RELIABLE, p.reliable_url_rate),
                                         (_UNRELIABLE, p.unreliable_url_rate), (outlets, p.outlet_url_rate))
                    if not (p.leaning == "none" and d is outlets)]
        n_urls = rng.poisson([r for _, r in url_sets], size=(n, len(url_sets))) if url_sets else np.zeros((n, 0), int)
        for j in range(n):
            kind = kinds[kind_idx[j]]
            words = word_rows[j]
            for _ in range(int(n_kw[j])):
                words.insert(int(rng.integers(len(words) + 1)), _KEYWORDS[int(rng.integers(len(_KEYWORDS)))])
            for _ in range(int(n_emoji[j])):
                words.append(_EMOJI[int(rng.integers(len(_EMOJI)))])
            if mention[j]:
                words.insert(0, "@" + users[mention_to[j]])
            text = " ".join(words)
            if words and decorate[j]:
                text = text[0].upper() + text[1:] + ".!?"[punct[j]]
            urls = []
            for (domains, _), m in zip(url_sets, n_urls[j]):
                for _ in range(int(m)):
                    d = domains[int(rng.integers(len(domains)))]
                    urls.append(f"https://{'www.' if rng.random() < 0.3 else ''}{d}/a/{int(rng.integers(1 << 30))}")
            target = None
            if kind in ("retweet", "quote"):
                r = rt_draw[j]
                if r < p.promoter_retweet_share and promoters:
                    pool, index = promoters, promoter_index
                elif r < p.promoter_retweet_share + p.own_retweet_share:
                    pool, index = own, own_index
                else:
                    pool, index = general, general_index
                target = pool[int(rng.integers(len(pool)))]
                if target == u and len(pool) > 1:
                    target = pool[(index[u] + 1) % len(pool)]
            rec = {"tweet_id": str(tid), "user_id": u, "timestamp": stamps[j] + "Z", "kind": kind, "text": text,
                   "urls": urls, "retweeted_user_id": target, "profile_description": profile}
            tid += 1
            records.append(rec)
    order = rng.permutation(len(records))
    records = [records[i] for i in order]
    if spec.duplicate_rate or spec.malformed_rate:
        noisy = []
        for rec in records:
            noisy.append(rec)
            if rng.random() < spec.duplicate_rate:
                noisy.append(dict(rec))
            if rng.random() < spec.malformed_rate:
                noisy.append({"tweet_id": f"bad{len(noisy)}", "user_id": rec["user_id"], "kind": "unknown",
                              "timestamp": rec["timestamp"]})
        records = noisy
    return SynthCorpus(records, ground_truth, status, promoter_vocab, spec)


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(ln + "\n" for ln in lines)


def write_synth(corpus: SynthCorpus, out_dir, rng_seed: int = 0) -> dict:
    """Write the stream (gzip, fixed mtime), ground truth and resource files.

    Returns a dict of the written paths, shaped like the pipeline's
    resource section.
    """
    os.makedirs(out_dir, exist_ok=True)
    p = lambda name: os.path.join(out_dir, name)  # noqa: E731
    with open(p("tweets.jsonl.gz"), "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
            for rec in corpus.records:
                gz.write((json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8"))
    with open(p("ground_truth.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "population"])
        for u in sorted(corpus.ground_truth):
            w.writerow([u, corpus.ground_truth[u]])
    with open(p("account_status.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "status"])
        for u in sorted(corpus.account_status):
            w.writerow([u, corpus.account_status[u]])
    with open(p("outlet_bias.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["domain", "leaning"])
        for d in _LEFT_OUTLETS:
            w.writerow([d, "left"])
        for d in _RIGHT_OUTLETS:
            w.writerow([d, "right"])
    _write_lines(p("keywords.txt"), _KEYWORDS)
    _write_lines(p("qanon_domains.txt"), _QANON_DOMAINS)
    _write_lines(p("reliable_domains.txt"), _RELIABLE)
    _write_lines(p("unreliable_domains.txt"), _UNRELIABLE)
    _write_lines(p("promoter_vocabulary.txt"), corpus.promoter_vocabulary)
    with open(p("synth_spec.json"), "w", encoding="utf-8") as fh:
        json.dump({"rng_seed": rng_seed, "spec": corpus.spec.to_dict()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    spec = corpus.spec
    run_config = {  # paths relative to this directory, as RunConfig.from_file expects
        "input": ["tweets.jsonl.gz"],
        "start": spec.start,
        "n_weeks": spec.n_weeks,
        "intervention_date": spec.intervention_date,
        "seed_weeks": spec.seed_weeks,
        "keywords": "keywords.txt",
        "qanon_domains": "qanon_domains.txt",
        "reliable_domains": "reliable_domains.txt",
        "unreliable_domains": "unreliable_domains.txt",
        "outlet_bias": "outlet_bias.csv",
        "account_status": "account_status.csv",
    }
    with open(p("run_config.json"), "w", encoding="utf-8") as fh:
        json.dump(run_config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {
        "input": [p("tweets.jsonl.gz")],
        "keywords": p("keywords.txt"),
        "qanon_domains": p("qanon_domains.txt"),
        "reliable_domains": p("reliable_domains.txt"),
        "unreliable_domains": p("unreliable_domains.txt"),
        "outlet_bias": p("outlet_bias.csv"),
        "account_status": p("account_status.csv"),
        "ground_truth": p("ground_truth.csv"),
        "run_config": p("run_config.json"),
    }


# ---------------------------------------------------------------------------
# presets

ARCHETYPES = ("neutral_left", "mainstream_right", "lexical", "amplifier", "self_declared", "hyperactive")

_NEUTRAL_PROFILES = ["dog lover, coffee addict", "Husband. Father. Fan of the game.", "teacher and reader",
                     "views are my own", ""]
_SELF_DECLARED_PROFILES = ["wwg1wga #qanon patriot", "#qarmy wwg1wga mom", "deepstate hunter #qanon",
                           "#savethechildren mama bear"]


def archetype_spec(n_per_population: int = 490, n_promoters: int = 60, tweets_per_week: float = 8.0,
                   **overrides) -> SynthSpec:
    """Promoters plus six populations shaped like the behavioural classes:
    a left-leaning low-signal group, a right-leaning low-signal group, a
    group that only talks like the promoters, amplifiers (retweet the
    promoters), self-declared supporters (QAnon profile) and hyper-active
    promoters (many keywords per tweet)."""
    tw = tweets_per_week
    pops = [
        Population("promoter", n_promoters, tweets_per_week=40.0, keyword_rate=1.0, qanon_url_rate=0.1,
                   unreliable_url_rate=0.2, lexicon_rate=0.5, emoji_rate=0.3, promoter_retweet_share=0.6,
                   profile_templates=_NEUTRAL_PROFILES, suspended_rate=0.3, is_promoter=True),
        Population("neutral_left", n_per_population, tw, reliable_url_rate=0.2, leaning="left", own_retweet_share=0.3,
                   profile_templates=_NEUTRAL_PROFILES, deleted_rate=0.02),
        Population("mainstream_right", n_per_population, tw, keyword_rate=0.01, reliable_url_rate=0.1,
                   unreliable_url_rate=0.05, lexicon_rate=0.25, promoter_retweet_share=0.1, own_retweet_share=0.3,
                   profile_templates=_NEUTRAL_PROFILES, suspended_rate=0.01, deleted_rate=0.02),
        Population("lexical", n_per_population, tw, keyword_rate=0.03, unreliable_url_rate=0.1,
                   lexicon_rate=0.6, promoter_retweet_share=0.1, own_retweet_share=0.3, profile_templates=_NEUTRAL_PROFILES,
                   suspended_rate=0.05, deleted_rate=0.03),
        Population("amplifier", n_per_population, tw, keyword_rate=0.1, unreliable_url_rate=0.2,
                   lexicon_rate=0.15, promoter_retweet_share=0.75, own_retweet_share=0.2, profile_templates=_NEUTRAL_PROFILES,
                   suspended_rate=0.15, deleted_rate=0.05),
        Population("self_declared", n_per_population, tw, keyword_rate=0.2, unreliable_url_rate=0.2,
                   lexicon_rate=0.2, promoter_retweet_share=0.35, own_retweet_share=0.3, profile_templates=_SELF_DECLARED_PROFILES,
                   suspended_rate=0.2, deleted_rate=0.05),
        Population("hyperactive", n_per_population, tw, keyword_rate=1.0, qanon_url_rate=0.1,
                   unreliable_url_rate=0.3, lexicon_rate=0.2, emoji_rate=0.3, promoter_retweet_share=0.35, own_retweet_share=0.3,
                   profile_templates=_NEUTRAL_PROFILES, suspended_rate=0.3, deleted_rate=0.05),
    ]
    return SynthSpec(pops, **overrides)


def demo_spec() -> SynthSpec:
    """About 50k tweets over ~700 users, with a little duplicate/malformed noise."""
    return archetype_spec(n_per_population=110, n_promoters=25, tweets_per_week=5.0,
                          duplicate_rate=0.002, malformed_rate=0.001)


def throughput_spec() -> SynthSpec:
    """Roughly 10k users and 1M tweets."""
    return archetype_spec(n_per_population=1640, n_promoters=160, tweets_per_week=8.6)
