"""Array-backed CART trees shared by the forests and gradient boosting.

Node arrays follow the usual flat layout: ``left``/``right`` hold child ids
(-1 at leaves), ``feature`` is -1 at leaves, samples with
``x[feature] <= threshold`` go left. ``cover`` counts training samples
(bootstrap duplicates included) reaching each node.

For binary 0/1 labels the weighted Gini impurity of a split equals twice its
sum of squared errors, so both criteria reduce to maximising
``S_L**2 / n_L + S_R**2 / n_R`` over candidate splits.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import ContractError

LEAF = -1


@dataclass
class Tree:
    left: np.ndarray
    right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self):
        return len(self.left)

    @property
    def is_leaf(self):
        return self.left == LEAF

    @property
    def max_depth(self):
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.left[node] != LEAF:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X):
        """Leaf id reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        active = np.arange(len(X))
        while active.size:
            cur = node[active]
            internal = self.left[cur] != LEAF
            active, cur = active[internal], cur[internal]
            if not active.size:
                break
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    def expected_value(self):
        leaves = self.is_leaf
        return float(np.sum(self.value[leaves] * self.cover[leaves]) / self.cover[0])

    def check_cover(self):
        internal = ~self.is_leaf
        return bool(np.all(self.cover[internal] == self.cover[self.left[internal]] + self.cover[self.right[internal]]))

    def to_dict(self):
        return {
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if "cover" not in d or d["cover"] is None:
            raise ContractError("tree document lacks cover counts")
        return cls(
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            value=np.asarray(d["value"], dtype=float),
            cover=np.asarray(d["cover"], dtype=np.int64),
        )


@njit(cache=True)
def _segment_best(X, t, idx, start, end, f, xbuf, tbuf):
    """Best midpoint split of rows idx[start:end] on feature f."""
    m = end - start
    for i in range(m):
        xbuf[i] = X[idx[start + i], f]
    order = np.argsort(xbuf[:m])
    total = 0.0
    for i in range(m):
        tbuf[i] = t[idx[start + order[i]]]
        total += tbuf[i]
    best = -np.inf
    thr = 0.0
    cs = 0.0
    for i in range(m - 1):
        cs += tbuf[i]
        lo = xbuf[order[i]]
        hi = xbuf[order[i + 1]]
        if hi > lo:
            nl = i + 1.0
            proxy = cs * cs / nl + (total - cs) * (total - cs) / (m - nl)
            if proxy > best:
                best = proxy
                thr = 0.5 * (lo + hi)
                if thr >= hi:
                    thr = lo
    return best, thr


@njit(cache=True)
def _segment_random(X, t, idx, start, end, f, lo, hi, rng):
    """Score one uniform threshold in [lo, hi) on feature f (Extra-Trees style)."""
    thr = rng.uniform(lo, hi)
    if thr >= hi:
        thr = lo
    nl = 0.0
    sl = 0.0
    total = 0.0
    for i in range(start, end):
        v = t[idx[i]]
        total += v
        if X[idx[i], f] <= thr:
            nl += 1.0
            sl += v
    m = end - start
    proxy = sl * sl / nl + (total - sl) * (total - sl) / (m - nl)
    return proxy, thr


@njit(cache=True)
def _grow(X, t, max_depth, random_split, k, rng):
    n, p = X.shape
    cap = 2 * n
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    value = np.zeros(cap)
    cover = np.zeros(cap, dtype=np.int64)
    idx = np.arange(n)
    scratch = np.empty(n, dtype=np.int64)
    xbuf = np.empty(n)
    tbuf = np.empty(n)
    stack = np.empty((cap, 4), dtype=np.int64)

    s = 0.0
    for i in range(n):
        s += t[i]
    value[0] = s / n
    cover[0] = n
    n_nodes = 1
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start
        if m < 2 or (max_depth >= 0 and depth >= max_depth):
            continue
        tmin = np.inf
        tmax = -np.inf
        for i in range(start, end):
            v = t[idx[i]]
            tmin = min(tmin, v)
            tmax = max(tmax, v)
        if tmax == tmin:
            continue

        perm = rng.permutation(p)
        best = -np.inf
        best_f = -1
        best_thr = 0.0
        scored = 0
        for q in range(p):
            f = perm[q]
            lo = np.inf
            hi = -np.inf
            for i in range(start, end):
                v = X[idx[i], f]
                lo = min(lo, v)
                hi = max(hi, v)
            if hi <= lo:
                continue
            if random_split:
                proxy, thr = _segment_random(X, t, idx, start, end, f, lo, hi, rng)
            else:
                proxy, thr = _segment_best(X, t, idx, start, end, f, xbuf, tbuf)
            if proxy > best:
                best = proxy
                best_f = f
                best_thr = thr
            scored += 1
            if scored >= k:
                break
        if best_f < 0:
            continue

        # stable partition of the segment: left rows first
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                scratch[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(start, end):
            if X[idx[i], best_f] > best_thr:
                scratch[nr] = idx[i]
                nr += 1
        sl = 0.0
        sr = 0.0
        for i in range(m):
            idx[start + i] = scratch[i]
            if i < nl:
                sl += t[scratch[i]]
            else:
                sr += t[scratch[i]]

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        value[lnode] = sl / nl
        value[rnode] = sr / (m - nl)
        cover[lnode] = nl
        cover[rnode] = m - nl
        stack[top, 0] = rnode
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        stack[top + 1, 0] = lnode
        stack[top + 1, 1] = start
        stack[top + 1, 2] = start + nl
        stack[top + 1, 3] = depth + 1
        top += 2

    return (left[:n_nodes], right[:n_nodes], feature[:n_nodes], threshold[:n_nodes],
            value[:n_nodes], cover[:n_nodes])


def resolve_max_features(max_features, n_features):
    if max_features is None or max_features == "all":
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if isinstance(max_features, float):
        return max(1, int(max_features * n_features))
    return max(1, min(int(max_features), n_features))


def fit_cart(X, target, max_depth=None, split_mode="best", max_features=None, rng=None):
    """Grow one tree on ``target`` (0/1 labels or real residuals).

    Leaf values are the mean target of the samples reaching them. Candidate
    features are taken in a random order until ``max_features`` non-constant
    ones have been scored; constant features do not use up the budget. Ties
    between features go to the one drawn first.
    """
    X = np.ascontiguousarray(X, dtype=float)
    t = np.ascontiguousarray(target, dtype=float)
    n, p = X.shape
    if n < 1:
        raise ContractError("fit_cart needs at least one sample")
    if len(t) != n:
        raise ContractError("target length does not match X")
    if split_mode not in ("best", "random"):
        raise ContractError(f"unknown split mode {split_mode!r}")
    rng = np.random.default_rng(0) if rng is None else rng
    k = resolve_max_features(max_features, p)
    depth = -1 if max_depth is None else int(max_depth)
    arrays = _grow(X, t, depth, split_mode == "random", k, rng)
    return Tree(*(a.copy() for a in arrays))
