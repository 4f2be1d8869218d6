"""Which words separate the promoters from everyone else?

Promoters here use 15 planted words at a high rate; one other population
uses them too, but rarely. The weighted log-odds with an informative
Dirichlet prior (alpha = 0.01) scores every word, and the lexicon keeps
the top 0.5% of the vocabulary.

The two ranking choices behave differently for words that only the
seed group ever writes: their variance carries a 1/alpha term, so the
z-score stays small however often they are used. Ranking by the raw
log-odds keeps them, but it also promotes words seen once or twice in
seed tweets and never elsewhere, which is mostly noise.
"""

from datetime import date

import numpy as np

from radsignals.corpus import AnalysisWindow, ingest
from radsignals.lexicon import CorpusCounts, build_lexicon, weighted_log_odds
from radsignals.matchers import MatcherSet
from radsignals.synth import archetype_spec, synth_corpus

spec = archetype_spec(n_per_population=120, n_promoters=30, tweets_per_week=4.0)
for p in spec.populations:
    if not p.is_promoter and p.name != "lexical":
        p.lexicon_rate = 0.0
spec.populations[[p.name for p in spec.populations].index("lexical")].lexicon_rate = 0.02
corpus = synth_corpus(spec, rng_seed=11)

window = AnalysisWindow(date(2020, 6, 20), 11, date(2020, 7, 21), 5)
aggs = ingest(corpus.records, window, MatcherSet.defaults())
seeds = {u for u, p in corpus.ground_truth.items() if p == "promoter"}
seed_c = CorpusCounts.from_users(aggs, [u for u in aggs if u in seeds])
bg_c = CorpusCounts.from_users(aggs, [u for u in aggs if u not in seeds])
entries = weighted_log_odds(seed_c, bg_c)
print(f"vocabulary {len(entries)}, seed tokens {seed_c.total}, background tokens {bg_c.total}")

planted = set(corpus.promoter_vocabulary)
for rank_by in ("z", "delta"):
    lex = build_lexicon(entries, rank_by=rank_by)
    print(f"\nrank by {rank_by}: {lex.n_candidates} candidates, {len(lex)} kept after filtering, "
          f"{len(planted & lex.tokens)}/{len(planted)} planted words")
    for e in sorted(lex.provenance.values(), key=lambda e: -getattr(e, rank_by))[:8]:
        tag = "planted" if e.token in planted else ""
        print(f"  {e.token:<18} y1={e.y1:>5} y2={e.y2:>5} delta={e.delta:6.2f} z={e.z:6.2f} {tag}")

# z for a word no background user writes is bounded by delta * sqrt(alpha)
excl = [e for e in entries if e.y2 == 0 and e.y1 > 0]
if excl:
    ratio = np.array([e.z / e.delta for e in excl])
    print(f"\nseed-only words: {len(excl)}, z/delta in [{ratio.min():.3f}, {ratio.max():.3f}] (bound 0.1)")
