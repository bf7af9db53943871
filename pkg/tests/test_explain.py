import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diabetes_pipeline.errors import ContractError
from diabetes_pipeline.evaluation import ConfusionMatrix, CVSummary, metrics
from diabetes_pipeline.explain import (
    ShapAttribution,
    consensus_rank,
    raw_output,
    select_strongest_tree_model,
    shap_summary_json,
    top_tree_models,
    tree_shap,
    tree_shap_single,
)
from diabetes_pipeline.models import (
    ExtraTreesSpec,
    GradBoostSpec,
    RandomForestSpec,
    Tree,
    fit_cart,
    fit_model,
)


def _cond_exp(tree, x, S, node=0):
    """E[f | x_S] under the path-dependent (cover-weighted) rule."""
    if tree.left[node] == -1:
        return tree.value[node]
    f = tree.feature[node]
    left, right = tree.left[node], tree.right[node]
    if f in S:
        child = left if x[f] <= tree.threshold[node] else right
        return _cond_exp(tree, x, S, child)
    c = tree.cover[node]
    return (tree.cover[left] * _cond_exp(tree, x, S, left)
            + tree.cover[right] * _cond_exp(tree, x, S, right)) / c


def _brute_shap(tree, x):
    p = len(x)
    phi = np.zeros(p)
    for i in range(p):
        others = [j for j in range(p) if j != i]
        for r in range(p):
            for S in itertools.combinations(others, r):
                w = math.factorial(r) * math.factorial(p - r - 1) / math.factorial(p)
                phi[i] += w * (_cond_exp(tree, x, set(S) | {i}) - _cond_exp(tree, x, set(S)))
    return phi


@given(st.integers(0, 100_000), st.sampled_from(["best", "random"]), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_matches_brute_force(seed, mode, depth):
    rng = np.random.default_rng(seed)
    p = 4
    X = rng.integers(0, 4, size=(40, p)).astype(float)
    y = rng.normal(size=40) + X[:, 0] * X[:, 1]
    tree = fit_cart(X, y, max_depth=depth, split_mode=mode, rng=rng)
    phi, ev = tree_shap_single(tree, X[:5])
    assert ev == pytest.approx(_cond_exp(tree, X[0], set()), abs=1e-12)
    for r in range(5):
        assert np.allclose(phi[r], _brute_shap(tree, X[r]), atol=1e-10)


def test_stump_closed_form():
    X = np.array([[0.0], [0.0], [0.0], [1.0]])
    tree = fit_cart(X, np.array([0, 0, 0, 1]), max_depth=1)
    phi, ev = tree_shap_single(tree, np.array([[1.0], [0.0]]))
    assert ev == pytest.approx(0.25)
    assert phi[:, 0] == pytest.approx([0.75, -0.25])


def test_unused_feature_gets_zero_and_symmetry():
    # f(x) = 1 if x0 > 0.5 and x1 > 0.5: x0 and x1 are symmetric, x2 is unused
    grid = np.array(list(itertools.product([0.0, 1.0], repeat=2)) * 5)
    X = np.column_stack([grid, np.random.default_rng(0).normal(size=len(grid))])
    y = (grid[:, 0] * grid[:, 1]).astype(int)
    tree = fit_cart(X, y, max_features=2, rng=np.random.default_rng(1))
    phi, _ = tree_shap_single(tree, np.array([[1.0, 1.0, 0.3]]))
    assert phi[0, 2] == 0.0
    assert phi[0, 0] == pytest.approx(phi[0, 1], abs=1e-12)


def test_constant_tree_dummy():
    tree = fit_cart(np.ones((5, 2)), np.array([0, 1, 1, 0, 1]))
    phi, ev = tree_shap_single(tree, np.random.default_rng(0).normal(size=(3, 2)))
    assert np.all(phi == 0)
    assert ev == pytest.approx(0.6)


@pytest.mark.parametrize(
    "spec,space",
    [
        (RandomForestSpec(n_trees=8, seed=1), "probability"),
        (ExtraTreesSpec(n_trees=8, seed=1), "probability"),
        (GradBoostSpec(n_trees=15, seed=1), "log-odds"),
    ],
)
def test_local_accuracy_for_ensembles(spec, space):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(80, 4))
    y = (X[:, 0] + X[:, 1] ** 2 + rng.normal(size=80) > 1).astype(int)
    model = fit_model(spec, X, y, feature_names=list("abcd"))
    attr = tree_shap(model, X[:20])
    assert attr.output_space == space
    assert attr.feature_names == list("abcd")
    recon = attr.base_value + attr.phi.sum(axis=1)
    assert np.allclose(recon, raw_output(model, X[:20]), atol=1e-10)
    if space == "probability":
        assert np.allclose(recon, model.positive_proba(X[:20]), atol=1e-10)
    else:
        assert np.allclose(recon, model.raw_score(X[:20]), atol=1e-10)


def test_tree_without_cover_rejected():
    t = fit_cart(np.array([[0.0], [1.0]]), np.array([0, 1]))
    bad = Tree(t.left, t.right, t.feature, t.threshold, t.value, t.cover[:1])
    with pytest.raises(ContractError):
        tree_shap_single(bad, np.zeros((1, 1)))
    with pytest.raises(ContractError):
        tree_shap(object(), np.zeros((1, 1)))


def _attr(name, means):
    return ShapAttribution(np.array([means]), 0.0, ["A", "B", "C"], "probability", model=name)


def test_consensus_ordering():
    r = consensus_rank([_attr("m1", [0.3, 0.2, 0.1]), _attr("m2", [0.2, 0.3, 0.1])])
    assert r.ranks == {"m1": [1, 2, 3], "m2": [2, 1, 3]}
    assert r.average_rank == {"A": 1.5, "B": 1.5, "C": 3.0}
    assert r.order == ["A", "B", "C"]
    single = consensus_rank([_attr("m", [0.1, 0.1, 0.4])])
    assert single.order == ["C", "A", "B"]
    assert "consensus" in shap_summary_json([_attr("m", [1, 2, 3])], single)
    with pytest.raises(ContractError):
        consensus_rank([])
    other = ShapAttribution(np.zeros((1, 3)), 0.0, ["A", "B", "D"], "probability")
    with pytest.raises(ContractError):
        consensus_rank([_attr("m", [1, 2, 3]), other])


def _summary(name, auc, recall):
    m = metrics(ConfusionMatrix(5, 5, 5, 5))
    m = type(m)(**{**m.to_dict(), "degenerate": (), "roc_auc": auc, "recall": recall})
    return CVSummary(name, [m, m])


def test_strongest_tree_model_selection():
    summaries = [
        _summary("svm_rbf", 0.99, 0.9),
        _summary("random_forest", 0.82, 0.6),
        _summary("extra_trees", 0.82, 0.7),
        _summary("gradient_boosting", 0.80, 0.9),
    ]
    assert select_strongest_tree_model(summaries) == "extra_trees"
    assert top_tree_models(summaries) == ["extra_trees", "random_forest", "gradient_boosting"]
    tie = [_summary("random_forest", 0.8, 0.6), _summary("extra_trees", 0.8, 0.6)]
    assert select_strongest_tree_model(tie) == "extra_trees"
    with pytest.raises(ContractError):
        select_strongest_tree_model([_summary("svm_rbf", 0.9, 0.9)])


def test_csv_layout():
    a = ShapAttribution(np.array([[0.1, -0.2]]), 0.5, ["g", "h"], "probability",
                        values=np.array([[1.0, 2.0]]))
    lines = a.to_csv(instance_ids=[7]).splitlines()
    assert lines == ["instance_id,feature,value,phi", "7,g,1.0,0.1", "7,h,2.0,-0.2"]
