"""Soft-margin RBF support vector machine solved by SMO.

The dual is handled in minimisation form, ``f(a) = 1/2 a'Qa - e'a`` with
``Q_ij = y_i y_j K(x_i, x_j)``, ``0 <= a_i <= C`` and ``y'a = 0``. Each step
picks the maximal violating pair and solves the two-variable subproblem
analytically, which keeps ``y'a`` fixed.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .base import ConvergenceError, TrainingError, check_width

TAU = 1e-12


def rbf_kernel(a, b, gamma: float) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("rows must have equal length")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def scale_gamma(X: np.ndarray) -> float:
    """``1 / (d * mean per-feature variance)``; 1.0 when every column is constant."""
    d = X.shape[1]
    var = float(X.var(axis=0).mean()) if X.size else 0.0
    return 1.0 / (d * var) if var > 0 else 1.0


class KernelCache:
    """Kernel rows computed on demand; the full matrix when it fits in ``max_bytes``."""

    def __init__(self, X: np.ndarray, gamma: float, max_bytes: int = 256 << 20):
        self.X = X
        self.gamma = gamma
        n = X.shape[0]
        self.sqnorm = (X * X).sum(1)
        self.full = None
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.capacity = max(2, max_bytes // max(8 * n, 1))
        if n * n * 8 <= max_bytes:
            self.full = rbf_matrix(X, X, gamma)

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        r = self.rows.get(i)
        if r is not None:
            self.rows.move_to_end(i)
            return r
        sq = self.sqnorm + self.sqnorm[i] - 2.0 * (self.X @ self.X[i])
        np.maximum(sq, 0.0, out=sq)
        r = np.exp(-self.gamma * sq)
        self.rows[i] = r
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return r


@dataclass(frozen=True)
class SVMModel:
    support_rows: np.ndarray  # (m, d)
    dual_coef: np.ndarray  # alpha_i * y_i for each support row
    bias: float
    gamma: float
    c: float = 1.0
    n_iter: int = 0
    dual_objective: float = 0.0
    support_index: Optional[np.ndarray] = field(default=None, compare=False)

    algorithm = "svm_rbf"

    @property
    def width(self) -> int:
        return self.support_rows.shape[1]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        check_width(X, self.width)
        if self.support_rows.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        out = np.empty(X.shape[0])
        step = max(1, (1 << 22) // max(self.support_rows.shape[0], 1))
        for s in range(0, X.shape[0], step):
            K = rbf_matrix(X[s:s + step], self.support_rows, self.gamma)
            out[s:s + step] = K @ self.dual_coef + self.bias
        return out

    score = decision_function

    def params(self) -> dict:
        return {
            "support_rows": self.support_rows.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "c": self.c,
            "n_iter": self.n_iter,
            "dual_objective": self.dual_objective,
        }

    @classmethod
    def from_params(cls, params: dict) -> "SVMModel":
        rows = np.asarray(params["support_rows"], dtype=np.float64)
        return cls(rows.reshape(len(params["dual_coef"]), -1),
                   np.asarray(params["dual_coef"], dtype=np.float64),
                   float(params["bias"]), float(params["gamma"]), float(params["c"]),
                   int(params.get("n_iter", 0)), float(params.get("dual_objective", 0.0)))


def dual_objective(alpha: np.ndarray, y_pm: np.ndarray, K: np.ndarray) -> float:
    """Maximisation-form dual ``sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij``."""
    v = alpha * y_pm
    return float(alpha.sum() - 0.5 * v @ K @ v)


def smo_train(X: np.ndarray, y: np.ndarray, c: float = 1.0, gamma: Optional[float] = None,
              tol: float = 1e-3, max_passes: int = 100,
              callback: Optional[Callable[[np.ndarray], None]] = None) -> SVMModel:
    """Train on 0/1 (or -1/+1) labels.

    Stops when the maximal KKT violation ``m(a) - M(a)`` drops to ``tol``;
    raises :class:`ConvergenceError` after ``max_passes * n`` pair updates.
    ``callback`` receives a copy of ``alpha`` after every update.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    y_pm = np.where(y > 0, 1.0, -1.0)
    if np.all(y_pm == 1) or np.all(y_pm == -1):
        raise TrainingError("SVM needs both classes in the training labels")
    if c <= 0:
        raise ValueError("c must be positive")
    if gamma is None:
        gamma = scale_gamma(X)
    if gamma <= 0:
        raise ValueError("gamma must be positive")

    n = X.shape[0]
    cache = KernelCache(X, gamma)
    diag = np.ones(n)  # K(x, x) = 1 for RBF
    alpha = np.zeros(n)
    grad = -np.ones(n)
    max_iter = max_passes * n
    it = 0
    while True:
        minus_yg = -y_pm * grad
        up = ((y_pm > 0) & (alpha < c)) | ((y_pm < 0) & (alpha > 0))
        low = ((y_pm > 0) & (alpha > 0)) | ((y_pm < 0) & (alpha < c))
        cand_up = np.where(up, minus_yg, -np.inf)
        cand_low = np.where(low, minus_yg, np.inf)
        i = int(np.argmax(cand_up))
        j = int(np.argmin(cand_low))
        gap = cand_up[i] - cand_low[j]
        if gap <= tol:
            break
        if it >= max_iter:
            violations = int(np.count_nonzero(up & (minus_yg > cand_low[j] + tol))
                             + np.count_nonzero(low & (minus_yg < cand_up[i] - tol)))
            raise ConvergenceError(
                f"SMO did not converge within {max_iter} updates "
                f"(max KKT violation {gap:.3g}, {violations} violating points)",
                float(gap), violations)

        Ki = cache.row(i)
        Kj = cache.row(j)
        old_i, old_j = alpha[i], alpha[j]
        quad = max(diag[i] + diag[j] - 2.0 * Ki[j], TAU)
        if y_pm[i] != y_pm[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            ai, aj = old_i + delta, old_j + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > c:
                    ai, aj = c, c - diff
            elif aj > c:
                aj, ai = c, c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            ai, aj = old_i - delta, old_j + delta
            if total > c:
                if ai > c:
                    ai, aj = c, total - c
            elif aj < 0:
                aj, ai = 0.0, total
            if total > c:
                if aj > c:
                    aj, ai = c, total - c
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        d_i, d_j = ai - old_i, aj - old_j
        # Q_i = y_i * y * K_i
        grad += y_pm * (y_pm[i] * d_i * Ki + y_pm[j] * d_j * Kj)
        it += 1
        if callback is not None:
            callback(alpha.copy())

    bias = _bias(alpha, y_pm, grad, c)
    sv = np.flatnonzero(alpha > 0)
    # f(a) = 1/2 a'Qa - e'a = 1/2 a'(G + e) - e'a
    dual = float(alpha.sum() - 0.5 * alpha @ (grad + 1.0))
    return SVMModel(X[sv].copy(), alpha[sv] * y_pm[sv], bias, float(gamma), float(c), it, dual, sv)


def _bias(alpha, y_pm, grad, c) -> float:
    yg = y_pm * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= c
        at_lower = alpha <= 0
        # bounds on rho from the points stuck at 0 or C
        ub_mask = (at_upper & (y_pm < 0)) | (at_lower & (y_pm > 0))
        lb_mask = (at_upper & (y_pm > 0)) | (at_lower & (y_pm < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return -rho
