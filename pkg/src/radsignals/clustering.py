"""K-means over the signal space, choice of k, and a 2-D t-SNE view.

Everything here is seeded and single-threaded in its reductions so that
repeated runs give bit-identical models and embeddings.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

MACHINE_EPSILON = np.finfo(np.double).eps


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # direct differences: exact zeros for coincident points, no cancellation
    return cdist(X, C, "sqeuclidean")


def normalize_rows(X: np.ndarray) -> np.ndarray:
    """Unit-norm rows (zero rows stay zero); Euclidean k-means on these ranks by cosine."""
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X, dtype=float), where=norms > 0)


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    rng_seed: int
    n_iter: int = 0
    history: list = field(default_factory=list)  # inertia per Lloyd iteration

    def assignments(self, users) -> dict:
        return {u: int(c) for u, c in zip(users, self.labels)}

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = _sqdist(X, centers[0][None]).ravel()
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, _sqdist(X, X[idx][None]).ravel())
    return np.array(centers, dtype=float)


def _centroid_sums(X, labels, k):
    counts = np.bincount(labels, minlength=k)
    sums = np.stack([np.bincount(labels, weights=X[:, j], minlength=k) for j in range(X.shape[1])], axis=1)
    return sums, counts


def _lloyd(X, C, max_iters, tol):
    k = len(C)
    history = []
    labels = None
    it = 0
    for it in range(1, max_iters + 1):
        d2 = _sqdist(X, C)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        sums, counts = _centroid_sums(X, new_labels, k)
        newC = C.copy()
        nz = counts > 0
        newC[nz] = sums[nz] / counts[nz, None]
        empty = np.flatnonzero(~nz)
        if len(empty):
            # reseed each empty cluster at the point farthest from its own centroid
            own = d2[np.arange(len(X)), new_labels].copy()
            for c in empty:
                far = int(own.argmax())
                newC[c] = X[far]
                own[far] = -1.0
        shift = float(np.sqrt(((newC - C) ** 2).sum(axis=1)).max())
        unchanged = labels is not None and np.array_equal(new_labels, labels) and not len(empty)
        C, labels = newC, new_labels
        if shift < tol or unchanged:
            break
    d2 = _sqdist(X, C)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(len(X)), labels].sum())
    return C, labels, inertia, it, history


def kmeans(points, k: int, rng_seed: int = 0, max_iters: int = 300, tol: float = 1e-10,
           n_init: int = 10) -> ClusterModel:
    """Lloyd's algorithm from k-means++ starts; the lowest-inertia run wins.

    Restart ``i`` draws from ``default_rng([rng_seed, i])`` so results depend
    only on ``rng_seed``. Ties in nearest-centroid assignment go to the
    lowest cluster index.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if not 1 <= k <= len(X):
        raise ValueError(f"need 1 <= k <= n_points, got k={k}, n={len(X)}")
    best = None
    for i in range(max(1, n_init)):
        rng = np.random.default_rng([rng_seed, i])
        C0 = _kmeanspp(X, k, rng)
        C, labels, inertia, n_iter, hist = _lloyd(X, C0, max_iters, tol)
        if best is None or inertia < best.inertia:
            best = ClusterModel(k, C, labels, inertia, rng_seed, n_iter, hist)
    return best


def silhouette(points, labels, sample_size: int | None = None, rng_seed: int = 0,
               chunk: int = 2048) -> float:
    """Mean silhouette coefficient; points alone in their cluster score 0.

    With ``sample_size`` the mean is taken over a seeded subsample of points
    (each still compared against the full population).
    """
    X = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    uniq, lab = np.unique(labels, return_inverse=True)
    k = len(uniq)
    if k < 2:
        raise ValueError("silhouette needs at least two clusters")
    n = len(X)
    sizes = np.bincount(lab, minlength=k).astype(float)
    idx = np.arange(n)
    if sample_size is not None and sample_size < n:
        idx = np.sort(np.random.default_rng(rng_seed).choice(n, sample_size, replace=False))
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    scores = np.empty(len(idx))
    for s in range(0, len(idx), chunk):
        rows = idx[s:s + chunk]
        D = cdist(X[rows], X)
        per = D @ onehot  # summed distance to each cluster
        own = lab[rows]
        own_size = sizes[own]
        a = np.where(own_size > 1, per[np.arange(len(rows)), own] / np.maximum(own_size - 1, 1), 0.0)
        mean_other = per / sizes[None, :]
        mean_other[np.arange(len(rows)), own] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        sc = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
        sc[own_size <= 1] = 0.0
        scores[s:s + chunk] = sc
    return float(scores.mean())


@dataclass
class KSelectionCurve:
    ks: list
    inertia: list
    silhouette: list
    elbow: int
    chosen_k: int
    models: dict = field(default_factory=dict, repr=False)

    def rows(self):
        return list(zip(self.ks, self.inertia, self.silhouette))


def elbow_k(ks, inertia) -> int:
    """k with the largest second difference of the inertia curve."""
    ks = list(ks)
    if len(ks) < 3:
        return ks[0]
    I = np.asarray(inertia, dtype=float)
    second = I[:-2] - 2 * I[1:-1] + I[2:]
    return ks[1 + int(np.argmax(second))]


def select_k(points, k_range=range(2, 21), rng_seed: int = 0, n_init: int = 10,
             silhouette_sample: int | None = None, tolerance: float = 0.05) -> KSelectionCurve:
    """Run k-means across ``k_range``; keep the elbow unless its silhouette is
    more than ``tolerance`` (relative) below the best silhouette."""
    X = np.asarray(points, dtype=float)
    ks = sorted(k_range)
    if not ks or ks[0] < 2 or ks[-1] > len(X):
        raise ValueError("k_range must lie within [2, n_points]")
    inertia, sil, models = [], [], {}
    for k in ks:
        m = kmeans(X, k, rng_seed=rng_seed, n_init=n_init)
        models[k] = m
        inertia.append(m.inertia)
        if len(np.unique(m.labels)) < 2:
            sil.append(float("nan"))
        else:
            sil.append(silhouette(X, m.labels, sample_size=silhouette_sample, rng_seed=rng_seed))
    elbow = elbow_k(ks, inertia)
    sil_arr = np.asarray(sil)
    best = ks[int(np.nanargmax(sil_arr))]
    best_val = float(np.nanmax(sil_arr))
    elbow_val = sil[ks.index(elbow)]
    chosen = elbow if elbow_val >= best_val - tolerance * abs(best_val) else best
    return KSelectionCurve(ks, inertia, sil, elbow, chosen, models)


def centroid_neighbors(model: ClusterModel, points, n: int, users=None) -> dict[int, list[int]]:
    """Row indices of the ``n`` members nearest each centroid (ties by user id)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    X = np.asarray(points, dtype=float)
    keys = list(users) if users is not None else list(range(len(X)))
    out = {}
    for c in range(model.k):
        members = np.flatnonzero(model.labels == c)
        d2 = ((X[members] - model.centroids[c]) ** 2).sum(axis=1)
        order = sorted(range(len(members)), key=lambda i: (d2[i], keys[members[i]]))
        out[c] = [int(members[i]) for i in order[:n]]
    return out


def cluster_letters(centroids: np.ndarray, order_by=(2, 0)) -> list[str]:
    """Letter per cluster index: A goes to the highest centroid on column
    ``order_by[0]`` (c_retweets), ties by ``order_by[1]`` (qc_tweets)."""
    C = np.asarray(centroids)
    order = sorted(range(len(C)), key=lambda c: tuple(-C[c, j] for j in order_by) + (c,))
    letters = [""] * len(C)
    for rank, c in enumerate(order):
        letters[c] = string.ascii_uppercase[rank] if rank < 26 else f"C{rank}"
    return letters


# ---------------------------------------------------------------------------
# exact t-SNE


def _conditional_p(D2: np.ndarray, perplexity: float, tol: float = 1e-5, steps: int = 100) -> np.ndarray:
    """Row-wise Gaussian affinities whose entropy matches log(perplexity).

    Bisection on the precision runs for all rows at once.
    """
    n = len(D2)
    target = np.log(perplexity)
    beta = np.ones(n)
    lo = np.full(n, -np.inf)
    hi = np.full(n, np.inf)
    mask = ~np.eye(n, dtype=bool)
    D2 = D2 - np.where(mask, D2, np.inf).min(axis=1, keepdims=True)  # shift for stability
    for _ in range(steps):
        P = np.exp(-D2 * beta[:, None]) * mask
        sumP = np.maximum(P.sum(axis=1), MACHINE_EPSILON)
        H = np.log(sumP) + beta * (D2 * P).sum(axis=1) / sumP
        diff = H - target
        if np.all(np.abs(diff) < tol):
            break
        up = diff > 0  # entropy too high -> sharpen
        lo = np.where(up, beta, lo)
        hi = np.where(up, hi, beta)
        beta = np.where(up, np.where(np.isinf(hi), beta * 2, (beta + hi) / 2),
                        np.where(np.isinf(lo), beta / 2, (beta + lo) / 2))
    P = np.exp(-D2 * beta[:, None]) * mask
    return P / np.maximum(P.sum(axis=1, keepdims=True), MACHINE_EPSILON)


@dataclass
class Embedding:
    coords: np.ndarray
    kl_divergence: float
    rng_seed: int


def tsne_embed(points, rng_seed: int = 0, perplexity: float = 30.0, iters: int = 1000,
               learning_rate: float | None = None, early_exaggeration: float = 12.0,
               exaggeration_iters: int = 250) -> Embedding:
    """Exact (dense) t-SNE into two dimensions.

    Gradient descent with momentum 0.5 -> 0.8 and per-parameter gains;
    ``learning_rate`` defaults to ``max(n / early_exaggeration / 4, 50)``.
    Exact duplicate rows share one embedded position: the optimisation
    runs over unique rows weighted by multiplicity, which is the plain
    objective restricted to coincident copies.
    """
    X = np.asarray(points, dtype=float)
    n = len(X)
    if perplexity <= 0 or n < 3 * perplexity:
        raise ValueError(f"perplexity {perplexity} infeasible for {n} points (need n >= 3*perplexity)")
    if learning_rate is None:
        learning_rate = max(n / early_exaggeration / 4.0, 50.0)
    sq = (X ** 2).sum(axis=1)
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D2, 0.0)
    condP = _conditional_p(D2, perplexity)
    P = condP + condP.T
    P = np.maximum(P / max(P.sum(), MACHINE_EPSILON), 1e-12)
    np.fill_diagonal(P, 0.0)
    del D2, condP

    # collapse exact duplicates, groups in order of first occurrence
    _, first, inverse, mult = np.unique(X, axis=0, return_index=True, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    group = rank[inverse]
    m = mult[order].astype(float)
    g = len(m)
    tied = g < n
    if tied:
        S = np.zeros((n, g))
        S[np.arange(n), group] = 1.0
        Pg = S.T @ P @ S
        np.fill_diagonal(Pg, 0.0)  # within-group pairs have zero displacement
        mm = np.outer(m, m)
        self_pairs = float((m * (m - 1)).sum())
    else:
        Pg = P

    rng = np.random.default_rng(rng_seed)
    Y = 1e-4 * rng.standard_normal((g, 2))
    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    W = np.empty((g, g))
    PQ = np.empty((g, g))
    for it in range(iters):
        exag = early_exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < exaggeration_iters else 0.8
        ysq = (Y ** 2).sum(axis=1)
        np.matmul(Y, Y.T, out=W)
        W *= -2.0
        W += ysq[:, None]
        W += ysq[None, :]
        np.maximum(W, 0.0, out=W)
        W += 1.0
        np.reciprocal(W, out=W)
        np.fill_diagonal(W, 0.0)
        if tied:
            Z = float((mm * W).sum()) + self_pairs
        else:
            Z = W.sum()
        # (exag*P - W/Z) * W  ==  exag*P*W - W*W/Z, computed without temporaries
        np.multiply(Pg, W, out=PQ)
        if exag != 1.0:
            PQ *= exag
        np.multiply(W, W, out=W)
        W *= 1.0 / Z
        if tied:
            W *= mm
        PQ -= W
        grad = 4.0 * (PQ.sum(axis=1)[:, None] * Y - PQ @ Y)
        if tied:
            grad /= m[:, None]
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        Y = Y + update
    Y = Y[group] if tied else Y
    ysq = (Y ** 2).sum(axis=1)
    W = 1.0 / (1.0 + np.maximum(ysq[:, None] + ysq[None, :] - 2.0 * Y @ Y.T, 0.0))
    np.fill_diagonal(W, 0.0)
    Q = np.maximum(W / W.sum(), MACHINE_EPSILON)
    off = ~np.eye(n, dtype=bool)
    kl = float((P[off] * np.log(P[off] / Q[off])).sum())
    return Embedding(Y, kl, rng_seed)
