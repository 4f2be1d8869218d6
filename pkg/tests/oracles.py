"""Independent reference implementations used as test oracles.

Nothing here imports the package's matchers: tokenization is a plain
character scanner, host extraction is string slicing, and per-user
recounts walk raw record dicts.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from datetime import datetime, timezone

EMOJI_RANGES = [(0x1F000, 0x1FAFF), (0x2600, 0x27BF), (0x2B00, 0x2BFF), (0x2300, 0x23FF)]
SKIN = (0x1F3FB, 0x1F3FF)
URL_TRAIL = set(".,!?;:)]}'\"…’")
APOSTROPHES = ("'", "’")


def _wordch(c):
    return c.isalnum() or c == "_"


def _emoji(c):
    o = ord(c)
    return any(a <= o <= b for a, b in EMOJI_RANGES)


def _skin(c):
    return SKIN[0] <= ord(c) <= SKIN[1]


def ref_tokenize(text: str) -> list[str]:
    s = text.lower()
    n = len(s)
    i = 0
    out = []
    while i < n:
        if s.startswith(("http://", "https://", "www."), i):
            j = i
            while j < n and not s[j].isspace():
                j += 1
            tok = s[i:j]
            while tok and tok[-1] in URL_TRAIL:
                tok = tok[:-1]
            if tok:
                out.append(tok)
            i = j
            continue
        c = s[i]
        if c in "@#" and i + 1 < n and _wordch(s[i + 1]):
            j = i + 1
            while j < n and _wordch(s[j]):
                j += 1
            if c == "#":
                out.append(s[i:j])
            i = j
            continue
        if _wordch(c):
            j = i
            while j < n and _wordch(s[j]):
                j += 1
            while j + 1 < n and s[j] in APOSTROPHES and _wordch(s[j + 1]):
                j += 1
                while j < n and _wordch(s[j]):
                    j += 1
            out.append(s[i:j])
            i = j
            continue
        if _emoji(c):
            j = i + 1
            if j < n and _skin(s[j]):
                j += 1
            out.append(s[i:j])
            i = j
            continue
        i += 1
    return out


def ref_keyword_hits(tokens: list[str], entries) -> list[str]:
    """Matched entry per token (single-token entries only)."""
    entries = set(entries)
    hits = []
    for t in tokens:
        if t.startswith(("http://", "https://", "www.")):
            continue
        if t in entries:
            hits.append(t)
        elif t.startswith("#") and t[1:] in entries:
            hits.append(t[1:])
    return hits


def ref_host(url: str):
    u = url.strip().lower()
    if "://" in u:
        u = u.split("://", 1)[1]
    for sep in "/?#":
        u = u.split(sep, 1)[0]
    u = u.rsplit("@", 1)[-1]
    u = u.split(":", 1)[0].rstrip(".")
    while u.startswith("www."):
        u = u[4:]
    return u or None


def ref_domain_match(url: str, entries) -> bool:
    host = ref_host(url)
    if host is None:
        return False
    labels = host.split(".")
    return any(".".join(labels[i:]) in entries for i in range(len(labels)))


def epoch_of(ts: str) -> int:
    return int(datetime.strptime(ts, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc).timestamp())


def recount(records, start_epoch: int, n_weeks: int, keywords, qanon, reliable=(), unreliable=()):
    """Per-user raw tallies straight from record dicts (valid, unique, in-window only)."""
    end = start_epoch + 7 * 86400 * n_weeks
    seen = set()
    users = defaultdict(lambda: {
        "tweets": 0, "self": 0, "hits": 0, "self_hits": 0, "retweets": Counter(), "tokens": Counter(),
        "profiles": {}, "days": set(), "qdays": set(), "keywords": set(), "rel": 0, "unrel": 0,
    })
    for r in records:
        if r.get("kind") not in ("original", "reply", "quote", "retweet") or r["tweet_id"] in seen:
            continue
        ep = epoch_of(r["timestamp"])
        if not start_epoch <= ep < end:
            continue
        seen.add(r["tweet_id"])
        u = users[r["user_id"]]
        toks = ref_tokenize(r["text"])
        kws = ref_keyword_hits(toks, keywords)
        n_url = sum(ref_domain_match(x, qanon) for x in r["urls"])
        u["rel"] += sum(ref_domain_match(x, reliable) for x in r["urls"])
        u["unrel"] += sum(ref_domain_match(x, unreliable) for x in r["urls"])
        hits = len(kws) + n_url
        u["tweets"] += 1
        u["hits"] += hits
        if r["kind"] != "retweet":
            u["self"] += 1
            u["self_hits"] += hits
            u["tokens"].update(toks)
        else:
            u["retweets"][r["retweeted_user_id"]] += 1
        prof = u["profiles"].setdefault(r["profile_description"], [0, (ep, r["tweet_id"])])
        prof[0] += 1
        prof[1] = min(prof[1], (ep, r["tweet_id"]))
        day = ep // 86400
        u["days"].add(day)
        if hits:
            u["qdays"].add(day)
        u["keywords"].update(kws)
    return dict(users)


def ref_canonical_profile(u) -> str:
    return min(u["profiles"].items(), key=lambda kv: (-kv[1][0], kv[1][1]))[0]


def ref_profile_ratio(text: str, keywords, qanon) -> float:
    """Matched characters / characters, scanning whitespace-delimited words.

    Only valid for profiles built from space-separated keywords, hashtags,
    hosts and plain words without punctuation.
    """
    if not text:
        return 0.0
    matched = 0
    for w in text.lower().split(" "):
        if w and (w in keywords or (w.startswith("#") and w[1:] in keywords) or ref_domain_match(w, qanon)):
            matched += len(w)
    return matched / len(text)
