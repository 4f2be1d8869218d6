"""Do clusters retweet each other more than chance?

Users are grouped by the population that generated them, and the
cluster-to-cluster retweet counts are compared with 1000 relabelings
that keep every group's size. Populations retweet their own members at
20-30%, so the diagonal should stand out, and the promoters should
draw retweets from the amplifiers.
"""

from datetime import date

import numpy as np

from radsignals.analysis import interaction_zscores
from radsignals.corpus import AnalysisWindow, ingest, retweet_edges
from radsignals.matchers import MatcherSet
from radsignals.synth import demo_spec, synth_corpus

corpus = synth_corpus(demo_spec(), rng_seed=3)
window = AnalysisWindow(date(2020, 6, 20), 11, date(2020, 7, 21), 5)
aggs = ingest(corpus.records, window, MatcherSet.defaults())

pops = sorted(set(corpus.ground_truth.values()))
assign = {u: pops.index(p) for u, p in corpus.ground_truth.items() if u in aggs}
np.set_printoptions(linewidth=140, precision=1, suppress=True)

for period in ("pre", "post"):
    edges = retweet_edges(aggs, period=period)
    res = interaction_zscores(edges, assign, period=period, R=1000, rng_seed=0)
    print(f"\n{period}-intervention: {sum(edges.values())} retweets, rows retweet columns")
    print(" " * 17 + "".join(f"{p[:8]:>9}" for p in pops))
    for i, p in enumerate(pops):
        cells = "".join(f"{z:8.1f}{'*' if pv < 0.05 else ' '}" for z, pv in zip(res.z[i], res.p[i]))
        print(f"{p:>16} {cells}")
print("\nz-scores; * marks p < 0.05 (two-sided, empirical)")
