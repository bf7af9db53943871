"""K-Means with k-means++ seeding, internal validity indices, the k sweep and profiling."""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateDataError
from .parallel import parallel_map

CH_SENTINEL = 1e300
DEFAULT_K_RANGE = tuple(range(2, 9))


@dataclass
class KMeansModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    iterations: int
    inertia_history: list = field(default_factory=list)
    best_init: int = 0

    def predict(self, X):
        return _assign(np.asarray(X, dtype=float), self.centroids)[0]

    def to_dict(self):
        return {
            "k": self.k,
            "centroids": self.centroids.tolist(),
            "labels": self.labels.tolist(),
            "inertia": self.inertia,
            "iterations": self.iterations,
            "inertia_history": list(self.inertia_history),
            "best_init": self.best_init,
        }


def _sq_dist(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _assign(X, C):
    d2 = _sq_dist(X, C)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(X)), labels]


def kmeans_plusplus(X, k, rng):
    """D^2-weighted seeding."""
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # fewer distinct points than requested centres so far; pick any unused row
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        closest = np.minimum(closest, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _repair_empty(X, labels, d2min, k):
    """Give every empty cluster the point currently farthest from its centroid."""
    labels = labels.copy()
    d2min = d2min.copy()
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.flatnonzero(movable)
        far = cand[np.argmax(d2min[cand])]
        counts[labels[far]] -= 1
        labels[far] = c
        counts[c] = 1
        d2min[far] = 0.0
    return labels


def _means(X, labels, k):
    C = np.zeros((k, X.shape[1]))
    np.add.at(C, labels, X)
    return C / np.bincount(labels, minlength=k)[:, None]


def _inertia(X, labels, C):
    return float(((X - C[labels]) ** 2).sum())


def _lloyd(X, k, seed, init, max_iter, tol):
    rng = np.random.default_rng([int(seed), int(init)])
    C = kmeans_plusplus(X, k, rng)
    labels, d2 = _assign(X, C)
    labels = _repair_empty(X, labels, d2, k)
    C = _means(X, labels, k)
    history = [_inertia(X, labels, C)]
    iterations = 1
    for _ in range(max_iter - 1):
        new_labels, d2 = _assign(X, C)
        new_labels = _repair_empty(X, new_labels, d2, k)
        unchanged = np.array_equal(new_labels, labels)
        newC = _means(X, new_labels, k)
        shift = float(np.sqrt(((newC - C) ** 2).sum()))
        labels, C = new_labels, newC
        history.append(_inertia(X, labels, C))
        iterations += 1
        if unchanged or shift < tol:
            break
    return KMeansModel(k, C, labels, history[-1], iterations, history, init)


def kmeans_fit(X, k, seed=0, n_init=10, max_iter=300, tol=1e-4, n_jobs=None):
    """Best of ``n_init`` k-means++ restarts, chosen by (inertia, restart index)."""
    X = np.asarray(X, dtype=float)
    if n_init < 1 or max_iter < 1:
        raise ContractError("n_init and max_iter must be at least 1")
    if k < 1:
        raise ContractError("k must be at least 1")
    distinct = len(np.unique(X, axis=0))
    if k > distinct:
        raise DegenerateDataError(f"k={k} exceeds the {distinct} distinct points")
    runs = parallel_map(lambda i: _lloyd(X, k, seed, i, max_iter, tol), range(n_init), n_jobs)
    return min(runs, key=lambda m: (m.inertia, m.best_init))


# --- validity indices ---------------------------------------------------------


def _clusters(labels):
    labels = np.asarray(labels)
    uniq, inv = np.unique(labels, return_inverse=True)
    if len(uniq) < 2:
        raise DegenerateDataError("validity indices need at least two non-empty clusters")
    return uniq, inv


@dataclass
class SilhouetteDetail:
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray


def silhouette(X, labels):
    """(mean silhouette, per-point detail). Singleton-cluster points score 0."""
    X = np.asarray(X, dtype=float)
    _, inv = _clusters(labels)
    k = inv.max() + 1
    D = np.sqrt(np.maximum(_exact_sq_pairwise(X), 0.0))
    counts = np.bincount(inv, minlength=k)
    sums = np.zeros((len(X), k))
    for c in range(k):
        sums[:, c] = D[:, inv == c].sum(axis=1)
    own = counts[inv]
    a = np.where(own > 1, sums[np.arange(len(X)), inv] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts[None, :]
    means[np.arange(len(X)), inv] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean()), SilhouetteDetail(a, b, s)


def _exact_sq_pairwise(X):
    diff = X[:, None, :] - X[None, :, :]
    return (diff ** 2).sum(axis=2)


@dataclass
class ScatterDecomposition:
    trace_between: float
    trace_within: float
    total: float
    dispersion: np.ndarray
    centroid_distances: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray


def scatter_decomposition(X, labels):
    X = np.asarray(X, dtype=float)
    _, inv = _clusters(labels)
    k = inv.max() + 1
    sizes = np.bincount(inv, minlength=k)
    C = _means(X, inv, k)
    mu = X.mean(axis=0)
    resid = X - C[inv]
    within = float((resid ** 2).sum())
    between = float((sizes * ((C - mu) ** 2).sum(axis=1)).sum())
    total = float(((X - mu) ** 2).sum())
    disp = np.bincount(inv, weights=np.sqrt((resid ** 2).sum(axis=1)), minlength=k) / sizes
    dc = np.sqrt(_exact_sq_pairwise(C))
    return ScatterDecomposition(between, within, total, disp, dc, C, sizes)


def davies_bouldin(X, labels):
    uniq, _ = _clusters(labels)
    sd = scatter_decomposition(X, labels)
    k = len(uniq)
    ratios = np.zeros(k)
    for i in range(k):
        best = 0.0
        for j in range(k):
            if i == j:
                continue
            if sd.centroid_distances[i, j] == 0:
                raise DegenerateDataError(
                    f"clusters {uniq[i]} and {uniq[j]} have coincident centroids; DB undefined"
                )
            best = max(best, (sd.dispersion[i] + sd.dispersion[j]) / sd.centroid_distances[i, j])
        ratios[i] = best
    return float(ratios.mean())


def calinski_harabasz_detail(X, labels):
    """(CH, degenerate). Zero within-cluster scatter gives (CH_SENTINEL, True)."""
    X = np.asarray(X, dtype=float)
    uniq, _ = _clusters(labels)
    n, k = len(X), len(uniq)
    if n <= k:
        raise DegenerateDataError(f"CH needs more points than clusters (n={n}, k={k})")
    sd = scatter_decomposition(X, labels)
    if sd.trace_within == 0:
        return CH_SENTINEL, True
    return float((sd.trace_between / (k - 1)) / (sd.trace_within / (n - k))), False


def calinski_harabasz(X, labels):
    return calinski_harabasz_detail(X, labels)[0]


@dataclass(frozen=True)
class ValidityIndices:
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    ch_degenerate: bool = False

    def to_dict(self):
        return {
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "calinski_harabasz": self.calinski_harabasz,
            "ch_degenerate": self.ch_degenerate,
        }


def validity_indices(X, labels):
    s, _ = silhouette(X, labels)
    ch, flag = calinski_harabasz_detail(X, labels)
    return ValidityIndices(s, davies_bouldin(X, labels), ch, flag)


# --- k sweep ------------------------------------------------------------------


def select_k(ks, silhouettes, margin=0.005):
    """Smallest k whose silhouette is within ``margin`` of the best one."""
    ks = list(ks)
    s = np.asarray(silhouettes, dtype=float)
    best = s.max()
    for k, v in sorted(zip(ks, s)):
        if v >= best - margin:
            return k
    raise ContractError("empty sweep")


@dataclass
class KSweepResult:
    ks: list
    indices: list
    selected_k: int
    margin: float
    rationale: dict
    models: dict = field(default_factory=dict, repr=False)

    def row(self, k):
        return self.indices[self.ks.index(k)]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "silhouette", "davies_bouldin", "calinski_harabasz"])
        for k, v in zip(self.ks, self.indices):
            w.writerow([k, repr(v.silhouette), repr(v.davies_bouldin), repr(v.calinski_harabasz)])
        return buf.getvalue()

    def to_dict(self):
        return {
            "ks": self.ks,
            "indices": [v.to_dict() for v in self.indices],
            "selected_k": self.selected_k,
            "margin": self.margin,
            "rationale": self.rationale,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def sweep_k(X, k_range=DEFAULT_K_RANGE, seed=0, margin=0.005, n_init=10, max_iter=300, tol=1e-4,
            n_jobs=None):
    X = np.asarray(X, dtype=float)
    ks = sorted(int(k) for k in k_range)
    if not ks or ks[0] < 2:
        raise ContractError("k range must contain values >= 2")
    models = {}
    indices = []
    for k in ks:
        m = kmeans_fit(X, k, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol, n_jobs=n_jobs)
        models[k] = m
        indices.append(validity_indices(X, m.labels))
    s = [v.silhouette for v in indices]
    chosen = select_k(ks, s, margin)
    best_s = ks[int(np.argmax(s))]
    best_db = ks[int(np.argmin([v.davies_bouldin for v in indices]))]
    best_ch = ks[int(np.argmax([v.calinski_harabasz for v in indices]))]
    rationale = {
        "rule": f"smallest k with silhouette >= max - {margin}",
        "silhouette_argmax": best_s,
        "davies_bouldin_argmin": best_db,
        "calinski_harabasz_argmax": best_ch,
        "parsimony_applied": chosen != best_s,
        "db_agrees": best_db == chosen,
        "ch_agrees": best_ch == chosen,
    }
    return KSweepResult(ks, indices, chosen, margin, rationale, models)


# --- profiling ----------------------------------------------------------------


@dataclass
class ClusterProfile:
    features: list
    sizes: list
    medians: list
    orientation: dict
    note: str

    def to_dict(self):
        return {
            "features": self.features,
            "sizes": self.sizes,
            "medians": [dict(zip(self.features, m)) for m in self.medians],
            "orientation": self.orientation,
            "note": self.note,
        }


INFERENTIAL_NOTE = (
    "Orientation is inferential: lower median insulin with younger median age is read as "
    "T1DM-like. No ground-truth subtype labels exist."
)


def profile_clusters(values, labels, features, insulin="Insulin", age="Age"):
    """Per-cluster medians in original units plus a subtype-orientation report.

    ``values`` is an (n, len(features)) matrix in original (unstandardized) units.
    """
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    features = list(features)
    clusters = np.unique(labels)
    sizes = [int(np.sum(labels == c)) for c in clusters]
    medians = [np.median(values[labels == c], axis=0).tolist() for c in clusters]
    orientation = {"status": "not applicable"}
    if len(clusters) == 2 and insulin in features and age in features:
        ji, ja = features.index(insulin), features.index(age)
        m0, m1 = medians
        if np.allclose(m0, m1, rtol=0, atol=0):
            orientation = {"status": "indistinguishable"}
        else:
            low_ins = 0 if m0[ji] < m1[ji] else 1 if m1[ji] < m0[ji] else None
            young = 0 if m0[ja] < m1[ja] else 1 if m1[ja] < m0[ja] else None
            lead = low_ins if low_ins is not None else young
            if lead is None or (low_ins is not None and young is not None and low_ins != young):
                orientation = {"status": "mixed", "lower_insulin": _cid(clusters, low_ins),
                               "younger": _cid(clusters, young)}
            else:
                orientation = {"status": "oriented",
                               "T1DM-like": int(clusters[lead]), "T2DM-like": int(clusters[1 - lead])}
    return ClusterProfile(features, sizes, medians, orientation, INFERENTIAL_NOTE)


def _cid(clusters, idx):
    return None if idx is None else int(clusters[idx])
