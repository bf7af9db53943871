"""Soft-margin RBF SVM trained by SMO, with Platt-scaled probabilities."""

from collections import OrderedDict

import numpy as np

from ..errors import ContractError, ConvergenceError
from ..folds import fold_indices, stratified_folds
from .base import TrainedClassifier, check_binary, sigmoid
from .specs import SvmRbfSpec

TAU = 1e-12


def scale_gamma(X):
    """1 / (p * mean per-feature population variance); 1.0 for a constant matrix."""
    X = np.asarray(X, dtype=float)
    var = float(np.mean(X.var(axis=0)))
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def rbf_kernel(A, B, gamma):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelRows:
    """Row-wise LRU cache of the signed kernel matrix Q_ij = y_i y_j K(x_i, x_j)."""

    def __init__(self, X, y, gamma, max_rows=None):
        self.X = X
        self.y = y
        self.gamma = gamma
        self.sq = (X * X).sum(1)
        n = len(X)
        self.max_rows = max_rows or max(2, min(n, int(2e8 / 8 / max(n, 1))))
        self._rows = OrderedDict()

    def row(self, i):
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        d = self.sq + self.sq[i] - 2.0 * self.X @ self.X[i]
        q = self.y[i] * self.y * np.exp(-self.gamma * np.maximum(d, 0.0))
        self._rows[i] = q
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return q


def smo_solve(Q, y, C, tol=1e-3, max_iter=None):
    """Solve min 0.5 a'Qa - sum(a), 0 <= a <= C, y'a = 0 by maximal-violating-pair SMO.

    ``Q`` is either a dense signed kernel matrix or a :class:`KernelRows`.
    ``y`` holds +1/-1. Returns ``(alpha, b, iterations, gap)`` where the
    decision function is ``sum(alpha * y * K(x_i, x)) + b``.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    rows = Q.row if isinstance(Q, KernelRows) else (lambda i: Q[i])
    diag = np.array([rows(i)[i] for i in range(n)]) if not isinstance(Q, KernelRows) else np.ones(n)
    max_iter = max_iter or max(100_000, 100 * n)
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    it = 0
    gap = np.inf
    while True:
        below_c = alpha < C
        above_0 = alpha > 0
        up = np.where(pos, below_c, above_0)
        low = np.where(pos, above_0, below_c)
        score = -y * G
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        gap = s_up[i] - s_low[j]
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not reach KKT tolerance {tol} in {max_iter} iterations (gap {gap:.3g})"
            )
        it += 1
        Qi = rows(i)
        Qj = rows(j)
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = diag[i] + diag[j] + 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = diag[i] + diag[j] - 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        G += Qi * (ni - ai) + Qj * (nj - aj)
        alpha[i], alpha[j] = ni, nj
    return alpha, -_rho(alpha, y, G, C), it, float(gap)


def _rho(alpha, y, G, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def platt_fit(f, y, max_iter=100):
    """Sigmoid P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton with backtracking on smoothed targets."""
    f = np.asarray(f, dtype=float)
    y = check_binary(y)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    hi, lo = (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)
    t = np.where(y == 1, hi, lo)
    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))

    def objective(a, b):
        z = f * a + b
        # sum of -t log p - (1 - t) log (1 - p) with p = sigmoid(-z)
        return float(np.sum(t * z + np.logaddexp(0.0, -z)))

    fval = objective(A, B)
    for _ in range(max_iter):
        p = sigmoid(-(f * A + B))
        q = p * (1 - p)
        h11 = 1e-12 + np.sum(f * f * q)
        h22 = 1e-12 + np.sum(q)
        h21 = np.sum(f * q)
        g1 = np.sum(f * (t - p))
        g2 = np.sum(t - p)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return float(A), float(B)


class SvmModel(TrainedClassifier):
    variant = "svm_rbf"

    def __init__(self, support_vectors, dual_coef, intercept, gamma, platt_a, platt_b, **kwargs):
        support_vectors = np.asarray(support_vectors, dtype=float)
        super().__init__(support_vectors.shape[1], **kwargs)
        self.support_vectors = support_vectors
        self.dual_coef = np.asarray(dual_coef, dtype=float)
        self.intercept = float(intercept)
        self.gamma = float(gamma)
        self.platt_a = float(platt_a)
        self.platt_b = float(platt_b)

    def decision_function(self, X):
        """Raw margin sum(alpha_i y_i K(x_i, x)) + b."""
        X = self._check(X)
        return rbf_kernel(X, self.support_vectors, self.gamma) @ self.dual_coef + self.intercept

    def decision_score(self, X):
        """Calibrated log-odds -(A f + B)."""
        return -(self.platt_a * self.decision_function(X) + self.platt_b)

    def positive_proba(self, X):
        return sigmoid(self.decision_score(X))

    def to_dict(self):
        return {
            **self._header(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
            "platt": [self.platt_a, self.platt_b],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["support_vectors"], d["dual_coef"], d["intercept"], d["gamma"], *d["platt"],
                   feature_names=d.get("feature_names"), meta=d.get("meta"))


def _train_margin(X, y, spec, gamma):
    ys = np.where(y == 1, 1.0, -1.0)
    alpha, b, iterations, gap = smo_solve(KernelRows(X, ys, gamma), ys, spec.C, spec.tol, spec.max_iter)
    sv = alpha > 0
    return X[sv], alpha[sv] * ys[sv], b, {"iterations": iterations, "kkt_gap": gap,
                                          "n_support": int(sv.sum()), "alpha": alpha}


def fit_svm_smo(X, y, spec=None, feature_names=None):
    """Fit the margin on all rows; Platt parameters come from out-of-fold margins."""
    spec = spec or SvmRbfSpec()
    X = np.asarray(X, dtype=float)
    y = check_binary(y)
    if len(np.unique(y)) < 2:
        raise ContractError("SVM needs both classes in y")
    gamma = scale_gamma(X) if spec.gamma == "scale" else float(spec.gamma)
    sv, coef, b, info = _train_margin(X, y, spec, gamma)

    k = spec.calibration_folds
    counts = np.bincount(y, minlength=2)
    if k >= 2 and counts.min() >= k:
        f_oof = np.empty(len(y))
        for train, test in fold_indices(stratified_folds(y, k, spec.seed), k):
            fsv, fcoef, fb, _ = _train_margin(X[train], y[train], spec, gamma)
            f_oof[test] = rbf_kernel(X[test], fsv, gamma) @ fcoef + fb
        calibration = "out-of-fold"
    else:
        f_oof = rbf_kernel(X, sv, gamma) @ coef + b
        calibration = "in-sample"
    A, B = platt_fit(f_oof, y)
    alpha = info.pop("alpha")
    meta = {**info, "seed": spec.seed, "calibration": calibration}
    model = SvmModel(sv, coef, b, gamma, A, B, feature_names=feature_names, meta=meta)
    model.alpha_ = alpha
    return model
