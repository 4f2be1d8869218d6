"""Tweet stream ingestion into per-user aggregates.

A stream of :class:`TweetRecord` (or raw JSON lines) is folded into one
:class:`UserAggregate` per author. Aggregation is order independent and
aggregates of disjoint sub-streams can be merged, so large inputs may be
sharded by user and combined afterwards.
"""

from __future__ import annotations

import gzip
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Iterator

from .matchers import MatcherSet, tokenize

KINDS = ("original", "reply", "quote", "retweet")
KIND_INDEX = {k: i for i, k in enumerate(KINDS)}
RETWEET = KIND_INDEX["retweet"]
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class MalformedRecord(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def parse_timestamp(value) -> datetime:
    """UTC datetime (second precision) from epoch seconds or an ISO/Twitter string."""
    if isinstance(value, datetime):
        ts = value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        ts = datetime.fromtimestamp(int(value), tz=timezone.utc)
    elif isinstance(value, str):
        if len(value) == 20 and value[-1] == "Z" and value[10] == "T":
            try:
                return datetime.fromisoformat(value[:-1]).replace(tzinfo=timezone.utc)
            except ValueError:
                raise MalformedRecord("bad_timestamp", value) from None
        s = value.strip()
        try:
            ts = datetime.fromisoformat(s[:-1] + "+00:00" if s.endswith("Z") else s)
        except ValueError:
            try:
                ts = datetime.strptime(s, "%a %b %d %H:%M:%S %z %Y")
            except ValueError:
                raise MalformedRecord("bad_timestamp", s) from None
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
    else:
        raise MalformedRecord("bad_timestamp", repr(value))
    return ts.astimezone(timezone.utc).replace(microsecond=0)


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    timestamp: datetime
    kind: str
    text: str = ""
    urls: tuple[str, ...] = ()
    retweeted_user_id: str | None = None
    profile_description: str = ""

    def __post_init__(self):
        if self.kind not in KIND_INDEX:
            raise MalformedRecord("bad_kind", repr(self.kind))
        if self.kind in ("retweet", "quote") and not self.retweeted_user_id:
            raise MalformedRecord("missing_retweeted_user", self.tweet_id)
        if not self.tweet_id or not self.user_id:
            raise MalformedRecord("missing_field", "tweet_id/user_id")

    @property
    def self_drafted(self) -> bool:
        return self.kind != "retweet"

    @classmethod
    def from_dict(cls, d: dict) -> "TweetRecord":
        if not isinstance(d, dict):
            raise MalformedRecord("not_an_object")
        try:
            tid, uid, ts, kind = d["tweet_id"], d["user_id"], d["timestamp"], d["kind"]
        except KeyError as e:
            raise MalformedRecord("missing_field", str(e)) from None
        text = d.get("text") or ""
        urls = d.get("urls") or ()
        profile = d.get("profile_description") or ""
        if not isinstance(text, str) or not isinstance(profile, str):
            raise MalformedRecord("bad_field_type", "text/profile_description")
        if not isinstance(urls, (list, tuple)) or not all(isinstance(u, str) for u in urls):
            raise MalformedRecord("bad_field_type", "urls")
        rt = d.get("retweeted_user_id")
        return cls(
            tweet_id=str(tid),
            user_id=str(uid),
            timestamp=parse_timestamp(ts),
            kind=kind,
            text=text,
            urls=tuple(urls),
            retweeted_user_id=None if rt in (None, "") else str(rt),
            profile_description=profile,
        )

    def to_dict(self) -> dict:
        return {
            "tweet_id": self.tweet_id,
            "user_id": self.user_id,
            "timestamp": self.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "kind": self.kind,
            "text": self.text,
            "urls": list(self.urls),
            "retweeted_user_id": self.retweeted_user_id,
            "profile_description": self.profile_description,
        }


@dataclass(frozen=True)
class AnalysisWindow:
    """``n_weeks`` UTC weeks starting at midnight of ``start``."""

    start: date
    n_weeks: int
    intervention_date: date
    seed_weeks: int

    def __post_init__(self):
        if self.n_weeks < 1 or self.seed_weeks < 1:
            raise ValueError("n_weeks and seed_weeks must be positive")
        if self.seed_weeks > self.n_weeks:
            raise ValueError("seed_weeks must not exceed n_weeks")
        if not self.start <= self.intervention_date < self.end:
            raise ValueError("intervention_date must fall inside the window")

    @property
    def end(self) -> date:
        """First day after the window."""
        return self.start + timedelta(days=7 * self.n_weeks)

    @property
    def start_epoch(self) -> int:
        return _day_epoch(self.start)

    @property
    def intervention_epoch(self) -> int:
        return _day_epoch(self.intervention_date)

    def contains(self, ts: datetime) -> bool:
        return self.start_epoch <= _epoch(ts) < _day_epoch(self.end)

    def to_dict(self) -> dict:
        return {
            "start": self.start.isoformat(),
            "n_weeks": self.n_weeks,
            "intervention_date": self.intervention_date.isoformat(),
            "seed_weeks": self.seed_weeks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisWindow":
        return cls(
            start=date.fromisoformat(d["start"]),
            n_weeks=int(d["n_weeks"]),
            intervention_date=date.fromisoformat(d["intervention_date"]),
            seed_weeks=int(d["seed_weeks"]),
        )


def _epoch(ts: datetime) -> int:
    return int((ts - _EPOCH).total_seconds())


def _day_epoch(d: date) -> int:
    return (d.toordinal() - 719163) * 86400  # 719163 == date(1970, 1, 1).toordinal()


def week_of(timestamp: datetime, window: AnalysisWindow) -> int:
    """0-based week index of ``timestamp``; raises ValueError outside the window."""
    days = (_epoch(timestamp) - window.start_epoch) // 86400
    if not 0 <= days < 7 * window.n_weeks:
        raise ValueError(f"{timestamp.isoformat()} outside analysis window")
    return days // 7


def _zeros(n):
    return [0] * n


@dataclass
class UserAggregate:
    """Everything the metrics need about one user, accumulated tweet by tweet."""

    user_id: str
    n_weeks: int
    kind_week: list = None  # [week][kind] -> tweets
    keyword_hits: list = None  # per week, all kinds
    url_hits: list = None
    sd_keyword_hits: list = None  # per week, self-drafted only
    sd_url_hits: list = None
    tokens: Counter = field(default_factory=Counter)  # self-drafted tokens
    retweets_pre: Counter = field(default_factory=Counter)  # target -> count
    retweets_post: Counter = field(default_factory=Counter)
    profiles: dict = field(default_factory=dict)  # text -> [count, first_epoch, first_tweet_id]
    active_days: set = field(default_factory=set)  # date ordinals
    qanon_days: set = field(default_factory=set)
    keywords_used: set = field(default_factory=set)
    reliable_urls: int = 0
    unreliable_urls: int = 0
    left_outlet_urls: int = 0
    right_outlet_urls: int = 0

    def __post_init__(self):
        n = self.n_weeks
        if self.kind_week is None:
            self.kind_week = [_zeros(len(KINDS)) for _ in range(n)]
        for name in ("keyword_hits", "url_hits", "sd_keyword_hits", "sd_url_hits"):
            if getattr(self, name) is None:
                setattr(self, name, _zeros(n))

    # -- derived counts -------------------------------------------------
    def kind_total(self, kind: str) -> int:
        k = KIND_INDEX[kind]
        return sum(row[k] for row in self.kind_week)

    @property
    def total_tweets(self) -> int:
        return sum(sum(row) for row in self.kind_week)

    @property
    def n_retweets(self) -> int:
        return sum(row[RETWEET] for row in self.kind_week)

    @property
    def self_drafted(self) -> int:
        return self.total_tweets - self.n_retweets

    def tweets_in_week(self, week: int) -> int:
        return sum(self.kind_week[week])

    def hits_in_week(self, week: int) -> int:
        return self.keyword_hits[week] + self.url_hits[week]

    @property
    def total_hits(self) -> int:
        return sum(self.keyword_hits) + sum(self.url_hits)

    @property
    def self_drafted_hits(self) -> int:
        return sum(self.sd_keyword_hits) + sum(self.sd_url_hits)

    @property
    def retweet_targets(self) -> Counter:
        return self.retweets_pre + self.retweets_post

    # -- accumulation -----------------------------------------------------
    def add(self, rec: TweetRecord, week: int, epoch: int, window: AnalysisWindow,
            matchers: MatcherSet, quotes_as_retweets: bool = False, diagnostics: Counter | None = None):
        self.kind_week[week][KIND_INDEX[rec.kind]] += 1
        toks = tokenize(rec.text)
        kw = matchers.keywords.find(toks)
        n_kw = len(kw)
        n_url = 0
        for u in rec.urls:
            q, rel, unrel, lean = matchers.classify_url(u, diagnostics)
            n_url += q
            self.reliable_urls += rel
            self.unreliable_urls += unrel
            if lean == "left":
                self.left_outlet_urls += 1
            elif lean == "right":
                self.right_outlet_urls += 1
        self.keyword_hits[week] += n_kw
        self.url_hits[week] += n_url
        if rec.self_drafted:
            self.sd_keyword_hits[week] += n_kw
            self.sd_url_hits[week] += n_url
            self.tokens.update(toks)
        if rec.kind == "retweet" or (quotes_as_retweets and rec.kind == "quote"):
            side = self.retweets_pre if epoch < window.intervention_epoch else self.retweets_post
            side[rec.retweeted_user_id] += 1
        prof = self.profiles.get(rec.profile_description)
        if prof is None:
            self.profiles[rec.profile_description] = [1, epoch, rec.tweet_id]
        else:
            prof[0] += 1
            if (epoch, rec.tweet_id) < (prof[1], prof[2]):
                prof[1], prof[2] = epoch, rec.tweet_id
        day = epoch // 86400 + 719163
        self.active_days.add(day)
        if n_kw or n_url:
            self.qanon_days.add(day)
        self.keywords_used.update(e for _, _, e in kw)

    def merge(self, other: "UserAggregate") -> "UserAggregate":
        """Combine aggregates of the same user built from disjoint records."""
        if other.user_id != self.user_id or other.n_weeks != self.n_weeks:
            raise ValueError("can only merge aggregates of the same user and window")
        out = UserAggregate(self.user_id, self.n_weeks)
        out.kind_week = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.kind_week, other.kind_week)]
        for name in ("keyword_hits", "url_hits", "sd_keyword_hits", "sd_url_hits"):
            setattr(out, name, [a + b for a, b in zip(getattr(self, name), getattr(other, name))])
        for name in ("tokens", "retweets_pre", "retweets_post"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("active_days", "qanon_days", "keywords_used"):
            setattr(out, name, getattr(self, name) | getattr(other, name))
        for name in ("reliable_urls", "unreliable_urls", "left_outlet_urls", "right_outlet_urls"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        profiles = {k: list(v) for k, v in self.profiles.items()}
        for text, (c, ep, tid) in other.profiles.items():
            if text in profiles:
                p = profiles[text]
                p[0] += c
                if (ep, tid) < (p[1], p[2]):
                    p[1], p[2] = ep, tid
            else:
                profiles[text] = [c, ep, tid]
        out.profiles = profiles
        return out

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id,
            "n_weeks": self.n_weeks,
            "kind_week": self.kind_week,
            "keyword_hits": self.keyword_hits,
            "url_hits": self.url_hits,
            "sd_keyword_hits": self.sd_keyword_hits,
            "sd_url_hits": self.sd_url_hits,
            "tokens": dict(sorted(self.tokens.items())),
            "retweets_pre": dict(sorted(self.retweets_pre.items())),
            "retweets_post": dict(sorted(self.retweets_post.items())),
            "profiles": [[t, *v] for t, v in sorted(self.profiles.items())],
            "active_days": sorted(self.active_days),
            "qanon_days": sorted(self.qanon_days),
            "keywords_used": sorted(self.keywords_used),
            "reliable_urls": self.reliable_urls,
            "unreliable_urls": self.unreliable_urls,
            "left_outlet_urls": self.left_outlet_urls,
            "right_outlet_urls": self.right_outlet_urls,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UserAggregate":
        return cls(
            user_id=d["user_id"],
            n_weeks=d["n_weeks"],
            kind_week=d["kind_week"],
            keyword_hits=d["keyword_hits"],
            url_hits=d["url_hits"],
            sd_keyword_hits=d["sd_keyword_hits"],
            sd_url_hits=d["sd_url_hits"],
            tokens=Counter(d["tokens"]),
            retweets_pre=Counter(d["retweets_pre"]),
            retweets_post=Counter(d["retweets_post"]),
            profiles={t: [c, ep, tid] for t, c, ep, tid in d["profiles"]},
            active_days=set(d["active_days"]),
            qanon_days=set(d["qanon_days"]),
            keywords_used=set(d["keywords_used"]),
            reliable_urls=d["reliable_urls"],
            unreliable_urls=d["unreliable_urls"],
            left_outlet_urls=d["left_outlet_urls"],
            right_outlet_urls=d["right_outlet_urls"],
        )


def canonical_profile(agg: UserAggregate) -> str:
    """Most frequent profile description; ties go to the one seen earliest."""
    if not agg.profiles:
        return ""
    best = min(agg.profiles.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[1][2]))
    return best[0]


def ingest(records: Iterable, window: AnalysisWindow, matchers: MatcherSet,
           dropped: Counter | None = None, quotes_as_retweets: bool = False,
           diagnostics: Counter | None = None) -> dict[str, UserAggregate]:
    """Fold a record stream into ``{user_id: UserAggregate}``.

    ``records`` may hold :class:`TweetRecord` objects, dicts, or raw JSON
    lines. Bad records never abort the run; they are tallied per reason in
    ``dropped`` together with out-of-window records and duplicate ids.
    """
    if dropped is None:
        dropped = Counter()
    aggs: dict[str, UserAggregate] = {}
    seen_ids: set = set()
    start = window.start_epoch
    span = 7 * window.n_weeks * 86400
    for raw in records:
        try:
            if isinstance(raw, TweetRecord):
                rec = raw
            else:
                if isinstance(raw, (str, bytes)):
                    if not raw.strip():
                        continue
                    try:
                        raw = json.loads(raw)
                    except ValueError:
                        raise MalformedRecord("json_decode") from None
                rec = TweetRecord.from_dict(raw)
        except MalformedRecord as e:
            dropped[e.reason] += 1
            continue
        epoch = _epoch(rec.timestamp)
        offset = epoch - start
        if not 0 <= offset < span:
            dropped["out_of_window"] += 1
            continue
        if rec.tweet_id in seen_ids:
            dropped["duplicate_id"] += 1
            continue
        seen_ids.add(rec.tweet_id)
        agg = aggs.get(rec.user_id)
        if agg is None:
            agg = aggs[rec.user_id] = UserAggregate(rec.user_id, window.n_weeks)
        agg.add(rec, offset // (7 * 86400), epoch, window, matchers, quotes_as_retweets, diagnostics)
    return aggs


def merge_aggregates(*parts: dict[str, UserAggregate]) -> dict[str, UserAggregate]:
    out: dict[str, UserAggregate] = {}
    for part in parts:
        for uid, agg in part.items():
            out[uid] = out[uid].merge(agg) if uid in out else agg
    return out


def filter_active(aggregates: dict[str, UserAggregate], min_tweets: int) -> set[str]:
    if min_tweets < 1:
        raise ValueError("min_tweets must be >= 1")
    return {uid for uid, a in aggregates.items() if a.total_tweets >= min_tweets}


def open_text(path) -> io.TextIOBase:
    """Open a UTF-8 text file, transparently gunzipping ``*.gz``."""
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def read_jsonl(*paths) -> Iterator[str]:
    """Raw lines of one or more JSON-lines files; parsing happens in :func:`ingest`."""
    for path in paths:
        with open_text(path) as fh:
            yield from fh


def aggregates_report(aggregates: dict[str, UserAggregate]) -> str:
    """Canonical JSON-lines dump, one aggregate per line sorted by user id."""
    return "".join(
        json.dumps(aggregates[uid].to_dict(), sort_keys=True, ensure_ascii=False) + "\n"
        for uid in sorted(aggregates)
    )


def load_aggregates(lines: Iterable[str]) -> dict[str, UserAggregate]:
    out = {}
    for ln in lines:
        if ln.strip():
            agg = UserAggregate.from_dict(json.loads(ln))
            out[agg.user_id] = agg
    return out


def retweet_edges(aggregates: dict[str, UserAggregate], sources=None, period: str = "all") -> dict[tuple[str, str], int]:
    """``{(retweeter, retweeted): count}`` for ``period`` in {all, pre, post}."""
    out: dict[tuple[str, str], int] = {}
    for uid in sorted(aggregates if sources is None else set(sources) & aggregates.keys()):
        agg = aggregates[uid]
        if period == "pre":
            targets = agg.retweets_pre
        elif period == "post":
            targets = agg.retweets_post
        elif period == "all":
            targets = agg.retweet_targets
        else:
            raise ValueError(f"unknown period {period!r}")
        for t, c in targets.items():
            out[(uid, t)] = c
    return out
