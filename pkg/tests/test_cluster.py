import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from diabetes_pipeline.cluster import (
    CH_SENTINEL,
    calinski_harabasz,
    calinski_harabasz_detail,
    davies_bouldin,
    kmeans_fit,
    profile_clusters,
    scatter_decomposition,
    select_k,
    silhouette,
    sweep_k,
    validity_indices,
)
from diabetes_pipeline.errors import ContractError, DegenerateDataError


def _blobs(k=3, per=30, seed=0, spread=0.4):
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0], [4, 0], [0, 4], [4, 4], [8, 8]])[:k]
    return np.concatenate([c + spread * rng.normal(size=(per, 2)) for c in centres])


def _silhouette_by_hand(X, labels):
    n = len(X)
    s = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        d = np.sqrt(((X - X[i]) ** 2).sum(axis=1))
        a = d[own].sum() / (own.sum() - 1)
        b = min(d[labels == c].mean() for c in np.unique(labels) if c != labels[i])
        s[i] = (b - a) / max(a, b)
    return s.mean()


labelled = st.integers(0, 10_000).map(lambda seed: np.random.default_rng(seed)).map(
    lambda rng: (rng.normal(size=(20, 3)), rng.permutation(np.arange(20) % 3))
)


@given(labelled)
@settings(max_examples=50, deadline=None)
def test_indices_match_formulae_and_sklearn(data):
    X, labels = data
    s, detail = silhouette(X, labels)
    assert s == pytest.approx(_silhouette_by_hand(X, labels), abs=1e-12)
    assert s == pytest.approx(skm.silhouette_score(X, labels), abs=1e-12)
    assert np.all(np.abs(detail.s) <= 1)
    assert davies_bouldin(X, labels) == pytest.approx(skm.davies_bouldin_score(X, labels), abs=1e-10)
    assert calinski_harabasz(X, labels) == pytest.approx(skm.calinski_harabasz_score(X, labels), rel=1e-10)


@given(labelled, st.floats(0.1, 10), st.floats(-5, 5))
@settings(max_examples=40, deadline=None)
def test_indices_invariances(data, scale, shift):
    X, labels = data
    base = validity_indices(X, labels)
    moved = validity_indices(scale * X + shift, labels)
    assert moved.silhouette == pytest.approx(base.silhouette, abs=1e-9)
    assert moved.davies_bouldin == pytest.approx(base.davies_bouldin, rel=1e-9)
    assert moved.calinski_harabasz == pytest.approx(base.calinski_harabasz, rel=1e-9)
    relabelled = validity_indices(X, (labels + 1) % 3)
    assert relabelled.silhouette == pytest.approx(base.silhouette, abs=1e-12)
    perm = np.random.default_rng(0).permutation(len(X))
    assert validity_indices(X[perm], labels[perm]).davies_bouldin == pytest.approx(base.davies_bouldin)


def test_scatter_identity():
    X, labels = np.random.default_rng(1).normal(size=(30, 2)), np.arange(30) % 4
    sd = scatter_decomposition(X, labels)
    assert sd.trace_between + sd.trace_within == pytest.approx(sd.total, rel=1e-12)


def test_hand_values():
    # two tight pairs: DB = (0.5 + 0.5) / 10 = 0.1, silhouette closed form
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    labels = np.array([0, 0, 1, 1])
    assert davies_bouldin(X, labels) == pytest.approx(0.1)
    s_edge = (9.5 - 1) / 9.5
    s_inner = (10.5 - 1) / 10.5
    assert silhouette(X, labels)[0] == pytest.approx((s_edge + s_inner) / 2)
    # B = 4 * 25 = 100, W = 4 * 0.25 = 1, CH = (100 / 1) / (1 / 2) = 200
    assert calinski_harabasz(X, labels) == pytest.approx(200.0)


def test_degenerate_cases():
    X = np.array([[0.0], [0.0], [5.0], [5.0]])
    ch, flag = calinski_harabasz_detail(X, np.array([0, 0, 1, 1]))
    assert flag and ch == CH_SENTINEL
    with pytest.raises(DegenerateDataError):
        calinski_harabasz(X[:2], np.array([0, 1]))
    with pytest.raises(DegenerateDataError):
        silhouette(X, np.zeros(4, int))
    with pytest.raises(DegenerateDataError):
        davies_bouldin(np.array([[0.0], [2.0], [1.0], [1.0]]), np.array([0, 0, 1, 1]))
    singleton = silhouette(np.array([[0.0], [1.0], [9.0]]), np.array([0, 0, 1]))[1]
    assert singleton.s[2] == 0.0


def test_kmeans_recovers_blobs_and_is_deterministic():
    X = _blobs()
    a = kmeans_fit(X, 3, seed=5)
    b = kmeans_fit(X, 3, seed=5, n_jobs=2)
    assert np.array_equal(a.labels, b.labels)
    assert len(np.unique(a.labels)) == 3
    for c in range(3):
        assert len(np.unique(a.labels[c * 30:(c + 1) * 30])) == 1
    assert np.all(np.diff(a.inertia_history) <= 1e-9)
    assert np.array_equal(a.predict(X), a.labels)


def test_kmeans_matches_sklearn_inertia():
    from sklearn.cluster import KMeans

    X = _blobs(k=4, seed=2, spread=1.2)
    ours = kmeans_fit(X, 4, seed=0)
    ref = KMeans(4, n_init=10, random_state=0).fit(X)
    assert ours.inertia <= ref.inertia_ * (1 + 1e-6)


def test_kmeans_small_exhaustive_optimum():
    X = np.array([[0.0], [0.3], [1.1], [5.0], [5.2], [9.0]])
    best = min(
        sum(((X[np.array(lab) == c] - X[np.array(lab) == c].mean()) ** 2).sum() for c in range(2))
        for lab in itertools.product([0, 1], repeat=6)
        if 0 < sum(lab) < 6
    )
    assert kmeans_fit(X, 2, seed=0).inertia == pytest.approx(best)


def test_kmeans_k_equals_n_and_too_many():
    X = np.array([[0.0], [1.0], [3.0]])
    assert kmeans_fit(X, 3, seed=0).inertia == 0.0
    with pytest.raises(DegenerateDataError):
        kmeans_fit(np.array([[1.0], [1.0], [2.0]]), 3)
    with pytest.raises(ContractError):
        kmeans_fit(X, 2, n_init=0)


def test_select_k_parsimony():
    assert select_k([2, 3, 4], [0.116, 0.110, 0.117]) == 2
    assert select_k([2, 3, 4], [0.100, 0.110, 0.117]) == 4
    assert select_k([2, 3], [0.5, 0.5]) == 2


def test_sweep_rows_and_rationale():
    X = _blobs(k=4, per=20, seed=3)
    r = sweep_k(X, range(2, 9), seed=0, n_init=3)
    assert r.ks == list(range(2, 9))
    assert len(r.to_csv().splitlines()) == 8
    assert r.selected_k == 4
    assert set(r.rationale) >= {"rule", "silhouette_argmax", "db_agrees", "ch_agrees"}
    with pytest.raises(ContractError):
        sweep_k(X, [1, 2])


def test_profile_orientation():
    feats = ["Glucose", "Insulin", "Age"]
    vals = np.array([[150, 60, 25], [160, 70, 28], [140, 200, 55], [145, 210, 60]], float)
    p = profile_clusters(vals, np.array([0, 0, 1, 1]), feats)
    assert p.orientation == {"status": "oriented", "T1DM-like": 0, "T2DM-like": 1}
    assert p.note
    mixed = vals.copy()
    mixed[:2, 2] = 70
    assert profile_clusters(mixed, np.array([0, 0, 1, 1]), feats).orientation["status"] == "mixed"
    same = np.array([[1, 2, 3]] * 4, float)
    assert profile_clusters(same, np.array([0, 0, 1, 1]), feats).orientation["status"] == "indistinguishable"
    three = profile_clusters(vals[:3], np.array([0, 1, 2]), feats)
    assert three.orientation["status"] == "not applicable"
