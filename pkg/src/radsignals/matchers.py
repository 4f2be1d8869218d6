"""Keyword, domain and token matching shared by every signal.

All matching runs on lowercased text. Tokens come from a small regex
tokenizer geared toward tweets: handles are dropped, hashtags and URLs
survive as single tokens, runs of emoji are split into one token each,
and punctuation is discarded.
"""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple
from urllib.parse import urlsplit

# Emoji blocks: symbols & pictographs, dingbats, misc technical, arrows/stars.
_EMOJI_CHARS = "\U0001F000-\U0001FAFF\u2600-\u27BF\u2B00-\u2BFF\u2300-\u23FF"
_SKIN_TONE = "\U0001F3FB-\U0001F3FF"
_URL_TRAILING = ".,!?;:)]}'\"…’"

_TOKEN_PATTERN = rf"""
    (?P<url>(?:https?://|www\.)\S+)
    |(?P<handle>@\w+)
    |(?P<hashtag>\#\w+)
    |(?P<word>\w+(?:['’]\w+)*)
    |(?P<emoji>[{_EMOJI_CHARS}][{_SKIN_TONE}]?)
    """
_TOKEN_RE = re.compile(_TOKEN_PATTERN, re.VERBOSE)
# same alternatives without groups so findall returns whole matches
_FLAT_RE = re.compile(re.sub(r"\(\?P<\w+>", "(?:", _TOKEN_PATTERN), re.VERBOSE)
_URL_PREFIXES = ("http://", "https://", "www.")

# Bare host mentions ("qanon.pub/x") that carry no scheme; used on profiles only.
_BARE_HOST_RE = re.compile(r"(?<![\w.@/-])(?:[a-z0-9](?:[a-z0-9-]*[a-z0-9])?\.)+[a-z]{2,}(?:/\S*)?")


class Token(NamedTuple):
    text: str
    start: int
    end: int
    kind: str  # url | hashtag | word | emoji


def scan(text: str) -> list[Token]:
    """Tokenize ``text.lower()`` and keep character spans into the lowered string."""
    lowered = text.lower()
    out = []
    for m in _TOKEN_RE.finditer(lowered):
        kind = m.lastgroup
        if kind == "handle":
            continue
        start, end = m.span()
        tok = m.group()
        if kind == "url":
            stripped = tok.rstrip(_URL_TRAILING)
            end -= len(tok) - len(stripped)
            tok = stripped
            if not tok:
                continue
        out.append(Token(tok, start, end, kind))
    return out


def tokenize(text: str) -> list[str]:
    """Lowercased tweet tokens with handles removed.

    Same tokens as :func:`scan`, without the span bookkeeping.

    >>> tokenize("Follow @alice #WWG1WGA \\U0001F64F\\U0001F64F")
    ['follow', '#wwg1wga', '🙏', '🙏']
    """
    out = []
    for tok in _FLAT_RE.findall(text.lower()):
        if tok[0] == "@":
            continue
        if tok.startswith(_URL_PREFIXES):
            tok = tok.rstrip(_URL_TRAILING)
            if not tok:
                continue
        out.append(tok)
    return out


def is_url_token(token: str) -> bool:
    return token.startswith(_URL_PREFIXES)


# ---------------------------------------------------------------------------
# resource lists


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip()]


def _data_path(name: str) -> Path:
    return Path(str(resources.files("radsignals") / "data" / name))


@dataclass(frozen=True)
class KeywordList:
    """Keyword entries; ``#``-prefixed entries only match hashtags."""

    entries: tuple[str, ...]
    _single: dict = field(init=False, repr=False, compare=False)
    _phrases: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        seen = set()
        cleaned = []
        for e in self.entries:
            e = " ".join(e.strip().lower().split())
            if not e or e == "#":
                raise ValueError(f"empty keyword entry: {e!r}")
            if e not in seen:
                seen.add(e)
                cleaned.append(e)
        object.__setattr__(self, "entries", tuple(cleaned))
        single, phrases = {}, {}
        for e in cleaned:
            toks = tuple(tokenize(e))
            if not toks or any(is_url_token(t) for t in toks):
                raise ValueError(f"keyword entry must be plain words or hashtags: {e!r}")
            if len(toks) == 1:
                single[toks[0]] = e
            else:
                phrases.setdefault(toks[0].lstrip("#"), []).append((toks, e))
        object.__setattr__(self, "_single", single)
        object.__setattr__(self, "_phrases", phrases)

    @classmethod
    def from_file(cls, path) -> "KeywordList":
        return cls(tuple(_read_lines(path)))

    def __len__(self):
        return len(self.entries)

    def find(self, tokens: list[str]) -> list[tuple[int, int, str]]:
        """Matched ``(start, end, entry)`` token spans; each span counted once."""
        single = self._single
        spans = {}
        for i, tok in enumerate(tokens):
            # URL tokens never equal an entry: entries are validated to be non-URL
            entry = single.get(tok)
            if entry is None and tok[0] == "#":
                entry = single.get(tok[1:])
            if entry is not None:
                spans[(i, i + 1)] = entry
        if not self._phrases:
            return [(i, j, e) for (i, j), e in spans.items()]
        for i, tok in enumerate(tokens):
            if is_url_token(tok):
                continue
            for seq, e in self._phrases.get(tok.lstrip("#"), ()):
                j = i + len(seq)
                if j <= len(tokens) and all(
                    _token_matches(tokens[i + n], s) for n, s in enumerate(seq)
                ):
                    prev = spans.get((i, j))
                    if prev is None or len(e) > len(prev):
                        spans[(i, j)] = e
        return [(s, e, entry) for (s, e), entry in sorted(spans.items())]


def _token_matches(tok: str, pattern: str) -> bool:
    if is_url_token(tok):
        return False
    if pattern.startswith("#"):
        return tok == pattern
    return tok == pattern or (tok.startswith("#") and tok[1:] == pattern)


def count_keyword_hits(text: str, keywords: KeywordList) -> int:
    """Occurrences (not distinct entries) of keywords in ``text``.

    >>> count_keyword_hits("WWG1WGA! #QAnon #qanon", KeywordList(("wwg1wga", "#qanon")))
    3
    """
    return len(keywords.find(tokenize(text)))


class DomainList:
    """Host suffix matcher: an entry matches itself and any subdomain.

    ``values`` optionally attaches a payload per entry (e.g. an outlet's
    leaning); ``lookup`` returns the payload of the most specific entry.
    """

    def __init__(self, entries: Iterable[str], values=None):
        self.values = {}
        for i, e in enumerate(entries):
            host = normalize_host(e)
            if host is None:
                raise ValueError(f"invalid domain entry: {e!r}")
            self.values[host] = values[i] if values is not None else host
        self.entries = tuple(sorted(self.values))
        self._lookup = lru_cache(maxsize=200_000)(self._lookup_host)

    @classmethod
    def from_file(cls, path) -> "DomainList":
        return cls(_read_lines(path))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, url):
        return self.lookup(url) is not None

    def _lookup_host(self, host):
        labels = host.split(".")
        for i in range(len(labels)):
            hit = self.values.get(".".join(labels[i:]))
            if hit is not None:
                return hit
        return None

    def lookup(self, url: str, diagnostics: Counter | None = None):
        host = normalize_host(url)
        if host is None:
            if diagnostics is not None:
                diagnostics["unparsable_url"] += 1
            return None
        return self._lookup(host)


@lru_cache(maxsize=500_000)
def normalize_host(url: str) -> str | None:
    """Lowercased host without port or leading ``www.``; None if unparsable."""
    url = url.strip().lower()
    if not url:
        return None
    if "://" not in url:
        url = "//" + url
    try:
        host = urlsplit(url).hostname
    except ValueError:
        return None
    if not host:
        return None
    host = host.rstrip(".")
    while host.startswith("www."):
        host = host[4:]
    if not host or " " in host or ".." in host:
        return None
    return host


def count_qanon_urls(urls: Iterable[str], domains: DomainList, diagnostics: Counter | None = None) -> int:
    return sum(1 for u in urls if domains.lookup(u, diagnostics) is not None)


def find_url_spans(text: str, domains: DomainList) -> list[tuple[int, int]]:
    """Character spans (in ``text.lower()``) of URLs or bare hosts on ``domains``."""
    lowered = text.lower()
    spans = [(t.start, t.end) for t in scan(text) if t.kind == "url" and t.text in domains]
    for m in _BARE_HOST_RE.finditer(lowered):
        if m.group() in domains:
            spans.append(m.span())
    return spans


# ---------------------------------------------------------------------------
# lexicon filtering


@lru_cache(maxsize=None)
def _stopwords_from(path: str) -> frozenset:
    return frozenset(_read_lines(path))


def load_stopwords(path=None) -> frozenset:
    return _stopwords_from(str(path or _data_path("stopwords.txt")))


def default_keywords() -> KeywordList:
    return KeywordList.from_file(_data_path("keywords.txt"))


def default_qanon_domains() -> DomainList:
    return DomainList.from_file(_data_path("qanon_domains.txt"))


def lexicon_token_filter(token: str, stopwords: frozenset | None = None) -> bool:
    """True for tokens eligible for the lexicon: >=3 chars, some letter, no stopword."""
    if stopwords is None:
        stopwords = load_stopwords()
    body = token[1:] if token.startswith("#") else token
    return len(body) >= 3 and body not in stopwords and any(c.isalpha() for c in body)


@dataclass
class MatcherSet:
    """Every list a corpus pass needs, bundled so ingest takes one argument."""

    keywords: KeywordList
    qanon_domains: DomainList
    reliable_domains: DomainList = field(default_factory=lambda: DomainList(()))
    unreliable_domains: DomainList = field(default_factory=lambda: DomainList(()))
    outlet_bias: DomainList = field(default_factory=lambda: DomainList(()))
    stopwords: frozenset = field(default_factory=load_stopwords)

    _url_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @classmethod
    def defaults(cls) -> "MatcherSet":
        return cls(default_keywords(), default_qanon_domains())

    def classify_url(self, url: str, diagnostics: Counter | None = None) -> tuple:
        """``(is_qanon, is_reliable, is_unreliable, leaning)`` for one URL, memoized."""
        hit = self._url_cache.get(url)
        if hit is None:
            host = normalize_host(url)
            if host is None:
                hit = (False, False, False, None, True)
            else:
                hit = (
                    self.qanon_domains.lookup(url) is not None,
                    self.reliable_domains.lookup(url) is not None,
                    self.unreliable_domains.lookup(url) is not None,
                    self.outlet_bias.lookup(url),
                    False,
                )
            if len(self._url_cache) < 1_000_000:
                self._url_cache[url] = hit
        if hit[4] and diagnostics is not None:
            diagnostics["unparsable_url"] += 1
        return hit[:4]


def load_outlet_bias(path) -> DomainList:
    """Read a ``domain,leaning`` CSV (leaning is ``left`` or ``right``)."""
    domains, values = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            leaning = row["leaning"].strip().lower()
            if leaning not in ("left", "right"):
                raise ValueError(f"bad leaning {leaning!r} for {row['domain']!r}")
            domains.append(row["domain"])
            values.append(leaning)
    return DomainList(domains, values)
