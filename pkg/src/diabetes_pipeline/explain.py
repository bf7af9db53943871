"""Exact path-dependent TreeSHAP and cross-model consensus ranking.

Each leaf contributes ``v * prod_j g_j`` to the conditional expectation
E[f | S], where for the distinct features j on the leaf's path ``g_j`` is the
indicator that x lies in the path's interval for j when j is in S, and the
product of cover ratios of the j-splits otherwise. The Shapley value of such a
product game has a closed form through the polynomial prod_j (z_j + o_j t);
the Shapley weights then apply to that polynomial with factor (z_i + o_i t)
divided out.
"""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ContractError
from .models.specs import TREE_MODELS
from .models.tree import Tree


@dataclass
class ShapAttribution:
    phi: np.ndarray
    base_value: float
    feature_names: list
    output_space: str
    values: np.ndarray = None
    model: str = None

    def mean_abs(self):
        return np.abs(self.phi).mean(axis=0)

    def to_csv(self, instance_ids=None):
        ids = range(len(self.phi)) if instance_ids is None else instance_ids
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance_id", "feature", "value", "phi"])
        for r, iid in enumerate(ids):
            for j, name in enumerate(self.feature_names):
                value = "" if self.values is None else repr(float(self.values[r, j]))
                w.writerow([iid, name, value, repr(float(self.phi[r, j]))])
        return buf.getvalue()

    def summary(self):
        return {
            "model": self.model,
            "output_space": self.output_space,
            "base_value": self.base_value,
            "mean_abs_phi": dict(zip(self.feature_names, self.mean_abs().tolist())),
        }


def _shapley_weights(p):
    """W[d, k] = k! (d-k-1)! / d! for path lengths d <= p and coalition sizes k < d."""
    W = np.zeros((p + 1, max(p, 1)))
    for d in range(1, p + 1):
        for k in range(d):
            W[d, k] = math.factorial(k) * math.factorial(d - k - 1) / math.factorial(d)
    return W


@njit(cache=True)
def _shap_kernel(left, right, feature, threshold, value, cover, X, W, phi):
    n_nodes = left.shape[0]
    n, p = X.shape
    parent = np.full(n_nodes, -1, dtype=np.int64)
    for node in range(n_nodes):
        if left[node] != -1:
            parent[left[node]] = node
            parent[right[node]] = node
    pos = np.full(p, -1, dtype=np.int64)
    feats = np.empty(p, dtype=np.int64)
    z = np.empty(p)
    lo = np.empty(p)
    hi = np.empty(p)
    o = np.empty(p)
    P = np.empty(p + 1)
    Q = np.empty(p)
    for leaf in range(n_nodes):
        if left[leaf] != -1 or leaf == 0:
            continue
        # distinct features on the root-to-leaf path with their interval and cover product
        d = 0
        node = leaf
        while node != 0:
            par = parent[node]
            f = feature[par]
            if pos[f] < 0:
                pos[f] = d
                feats[d] = f
                z[d] = 1.0
                lo[d] = -np.inf
                hi[d] = np.inf
                d += 1
            q = pos[f]
            z[q] *= cover[node] / cover[par]
            if node == left[par]:
                hi[q] = min(hi[q], threshold[par])
            else:
                lo[q] = max(lo[q], threshold[par])
            node = par
        for j in range(d):
            pos[feats[j]] = -1
        v = value[leaf]
        for r in range(n):
            for j in range(d):
                x = X[r, feats[j]]
                o[j] = 1.0 if (x > lo[j] and x <= hi[j]) else 0.0
            # coefficients of prod_j (z_j + o_j t), lowest degree first
            P[0] = 1.0
            for k in range(1, d + 1):
                P[k] = 0.0
            for j in range(d):
                for k in range(j + 1, 0, -1):
                    P[k] = P[k] * z[j] + P[k - 1] * o[j]
                P[0] = P[0] * z[j]
            for i in range(d):
                # divide out (z_i + o_i t)
                if o[i] > 0.0:
                    Q[d - 1] = P[d]
                    for k in range(d - 1, 0, -1):
                        Q[k - 1] = P[k] - z[i] * Q[k]
                else:
                    for k in range(d):
                        Q[k] = P[k] / z[i] if z[i] > 0.0 else 0.0
                s = 0.0
                for k in range(d):
                    s += W[d, k] * Q[k]
                phi[r, feats[i]] += v * (o[i] - z[i]) * s


def _check_tree(tree):
    if tree.cover is None or len(tree.cover) != tree.n_nodes:
        raise ContractError("tree lacks cover counts; path-dependent SHAP needs them")
    internal = ~tree.is_leaf
    if np.any(tree.cover[internal] <= 0):
        raise ContractError("tree has an internal node with zero cover")


def tree_shap_single(tree, X, weights=None):
    """(phi, expected value) for one tree; phi rows sum to tree(x) - expected value."""
    _check_tree(tree)
    X = np.ascontiguousarray(X, dtype=float)
    phi = np.zeros(X.shape)
    W = _shapley_weights(X.shape[1]) if weights is None else weights
    _shap_kernel(tree.left, tree.right, tree.feature, tree.threshold, tree.value,
                 tree.cover.astype(float), X, W, phi)
    return phi, tree.expected_value()


def additive_structure(model):
    """(offset, per-tree scales, trees, output space) of an additive tree model."""
    if isinstance(model, Tree):
        return 0.0, np.ones(1), [model], "tree output"
    if not hasattr(model, "additive_trees"):
        raise ContractError(f"{type(model).__name__} exposes no tree structure")
    offset, scales, trees = model.additive_trees()
    return offset, scales, trees, model.output_space


def raw_output(model, X):
    offset, scales, trees, _ = additive_structure(model)
    out = np.full(len(X), float(offset))
    for s, t in zip(scales, trees):
        out += s * t.predict(X)
    return out


def tree_shap(model, X, feature_names=None):
    """Exact path-dependent SHAP values of a tree or additive tree ensemble.

    Units follow the model's additive output: log-odds for gradient boosting,
    probability for the bagged forests.
    """
    X = np.asarray(X, dtype=float)
    offset, scales, trees, space = additive_structure(model)
    phi = np.zeros(X.shape)
    base = float(offset)
    W = _shapley_weights(X.shape[1])
    for s, t in zip(scales, trees):
        tphi, ev = tree_shap_single(t, X, W)
        phi += s * tphi
        base += s * ev
    names = feature_names or getattr(model, "feature_names", None) or [f"x{j}" for j in range(X.shape[1])]
    return ShapAttribution(phi, base, list(names), space, X.copy(), getattr(model, "variant", None))


@dataclass
class ConsensusRanking:
    feature_names: list
    models: list
    mean_abs: dict
    ranks: dict
    average_rank: dict
    order: list

    def to_dict(self):
        return {
            "models": self.models,
            "mean_abs_phi": {m: dict(zip(self.feature_names, v)) for m, v in self.mean_abs.items()},
            "ranks": {m: dict(zip(self.feature_names, v)) for m, v in self.ranks.items()},
            "average_rank": self.average_rank,
            "order": self.order,
        }


def _ranking(names, scores):
    """1-based ranks by descending score, ties by feature name."""
    order = sorted(range(len(names)), key=lambda j: (-scores[j], names[j]))
    ranks = np.empty(len(names), dtype=int)
    ranks[order] = np.arange(1, len(names) + 1)
    return ranks


def consensus_rank(attributions):
    if not attributions:
        raise ContractError("consensus needs at least one attribution")
    names = list(attributions[0].feature_names)
    for a in attributions[1:]:
        if list(a.feature_names) != names:
            raise ContractError(f"feature sets differ: {names} vs {list(a.feature_names)}")
    labels = [a.model or f"model{i}" for i, a in enumerate(attributions)]
    mean_abs = {}
    ranks = {}
    for label, a in zip(labels, attributions):
        m = a.mean_abs()
        mean_abs[label] = m.tolist()
        ranks[label] = _ranking(names, m).tolist()
    avg = np.mean([ranks[lb] for lb in labels], axis=0)
    order = [names[j] for j in sorted(range(len(names)), key=lambda j: (avg[j], names[j]))]
    return ConsensusRanking(names, labels, mean_abs, ranks, dict(zip(names, avg.tolist())), order)


def select_strongest_tree_model(summaries, candidates=TREE_MODELS):
    """Tree model with the highest mean CV ROC-AUC; ties by recall, then name."""
    pool = [s for s in summaries if s.model in candidates]
    if not pool:
        raise ContractError("no tree-ensemble summaries to choose from")
    best = min(pool, key=lambda s: (-s.mean("roc_auc"), -s.mean("recall"), s.model))
    return best.model


def top_tree_models(summaries, count=3, candidates=TREE_MODELS):
    pool = [s for s in summaries if s.model in candidates]
    pool.sort(key=lambda s: (-s.mean("roc_auc"), -s.mean("recall"), s.model))
    return [s.model for s in pool[:count]]


def shap_summary_json(attributions, consensus=None, **kwargs):
    doc = {"models": [a.summary() for a in attributions]}
    if consensus is not None:
        doc["consensus"] = consensus.to_dict()
    return json.dumps(doc, **kwargs)
