"""Choosing k and looking at the clusters.

Signals for the archetype corpus (six behavioural populations plus the
promoters, who act as seeds and are left out) go through k-means for
k = 2..12. The elbow of the inertia curve is kept unless its silhouette
falls more than 5% below the best one. A t-SNE map of the users nearest
each centroid is written as CSV.

    python demos/03_clustering.py [embedding.csv]
"""

import sys
from datetime import date

import numpy as np

from radsignals.clustering import cluster_letters, select_k, tsne_embed
from radsignals.corpus import AnalysisWindow, ingest
from radsignals.lexicon import CorpusCounts, build_lexicon, weighted_log_odds
from radsignals.matchers import MatcherSet
from radsignals.signals import feature_matrix, to_matrix
from radsignals.synth import archetype_spec, synth_corpus

corpus = synth_corpus(archetype_spec(n_per_population=200, n_promoters=40), rng_seed=5)
window = AnalysisWindow(date(2020, 6, 20), 11, date(2020, 7, 21), 5)
m = MatcherSet.defaults()
aggs = ingest(corpus.records, window, m)

seeds = {u for u, p in corpus.ground_truth.items() if p == "promoter"}
lex = build_lexicon(weighted_log_odds(CorpusCounts.from_users(aggs, [u for u in aggs if u in seeds]),
                                      CorpusCounts.from_users(aggs, [u for u in aggs if u not in seeds])))
vectors = feature_matrix({u: a for u, a in aggs.items() if u not in seeds}, seeds, lex, m.keywords, m.qanon_domains)
users, X = to_matrix(vectors)
print(f"{len(users)} users x 4 signals")

curve = select_k(X, range(2, 13), rng_seed=0, n_init=5)
print("\n  k   inertia   silhouette")
for k, inertia, sil in curve.rows():
    mark = " <- chosen" if k == curve.chosen_k else (" <- elbow" if k == curve.elbow else "")
    print(f"{k:3d} {inertia:9.2f} {sil:11.4f}{mark}")

model = curve.models[curve.chosen_k]
letters = cluster_letters(model.centroids)
truth = np.array([corpus.ground_truth[u] for u in users])
names = ("qc_tweets", "qc_profile", "c_retweets", "c_lexical")
print("\ncluster  size  " + "  ".join(f"{n:>10}" for n in names) + "  majority population")
for c in sorted(range(model.k), key=lambda c: letters[c]):
    members = truth[model.labels == c]
    pops, counts = np.unique(members, return_counts=True)
    top = f"{pops[counts.argmax()]} ({counts.max() / len(members):.0%})"
    print(f"{letters[c]:>7} {len(members):5d}  " + "  ".join(f"{v:10.3f}" for v in model.centroids[c]) + f"  {top}")

# t-SNE on up to 100 users nearest each centroid
d = np.linalg.norm(X - model.centroids[model.labels], axis=1)
pick = np.concatenate([np.flatnonzero(model.labels == c)[np.argsort(d[model.labels == c])[:100]]
                       for c in range(model.k)])
emb = tsne_embed(X[pick], rng_seed=0, iters=500)
print(f"\nt-SNE of {len(pick)} users, KL divergence {emb.kl_divergence:.3f}")
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as fh:
        fh.write("user_id,cluster,x,y\n")
        for i, (x, y) in zip(pick, emb.coords):
            fh.write(f"{users[i]},{letters[model.labels[i]]},{x:.6f},{y:.6f}\n")
    print("written to", sys.argv[1])
