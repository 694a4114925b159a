"""L2-regularised logistic regression trained by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ConvergenceError, TrainingError, check_width


def sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


@dataclass(frozen=True)
class LRGradient:
    weights: np.ndarray
    bias: float


def lr_objective(weights, bias, X, y, l2):
    """Mean cross-entropy plus ``l2 / 2 * ||w||^2`` (bias unpenalised)."""
    z = X @ weights + bias
    # log(1 + e^z) - y z, evaluated stably
    loss = np.logaddexp(0.0, z) - y * z
    return float(loss.mean() + 0.5 * l2 * np.dot(weights, weights))


def lr_gradient(weights, bias, X, y, l2) -> LRGradient:
    residual = sigmoid(X @ weights + bias) - y
    n = X.shape[0]
    return LRGradient(X.T @ residual / n + l2 * weights, float(residual.mean()))


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    n_iter: int = 0

    algorithm = "logistic_regression"

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    def score(self, X: np.ndarray) -> np.ndarray:
        check_width(X, self.width)
        return sigmoid(X @ self.weights + self.bias)

    def params(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "n_iter": self.n_iter}

    @classmethod
    def from_params(cls, params: dict) -> "LogisticModel":
        return cls(np.asarray(params["weights"], dtype=np.float64), float(params["bias"]),
                   int(params.get("n_iter", 0)))


def _newton_bias(w, b, f, X, y, l2):
    """One guarded 1-D Newton step on the bias.

    The bias is unpenalised and its curvature is only mean(p(1-p)), so plain
    gradient steps shrink its error by about 1% per iteration.
    """
    p = sigmoid(X @ w + b)
    curvature = float(np.mean(p * (1.0 - p)))
    if curvature <= 1e-12:
        return b, f
    b_new = b - float(np.mean(p - y)) / curvature
    f_new = lr_objective(w, b_new, X, y, l2)
    return (b_new, f_new) if f_new <= f else (b, f)


def fit_logistic(X: np.ndarray, y: np.ndarray, l2: float = 1.0, learning_rate: float = 0.1,
                 max_iter: int = 1000, tol: float = 1e-6) -> LogisticModel:
    """Gradient descent with Armijo backtracking (step halves from ``learning_rate``).

    The bias starts at the log-odds of the base rate and gets a guarded
    Newton correction after every gradient step.
    """
    y = y.astype(np.float64)
    if y.min() == y.max():
        raise TrainingError("logistic regression needs both classes in the training labels")
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    rate = y.mean()
    w = np.zeros(X.shape[1])
    b = float(np.log(rate / (1.0 - rate)))
    f = lr_objective(w, b, X, y, l2)
    for it in range(max_iter):
        g = lr_gradient(w, b, X, y, l2)
        sq = float(np.dot(g.weights, g.weights) + g.bias * g.bias)
        if np.sqrt(sq) <= tol:
            return LogisticModel(w, b, it)
        step = learning_rate
        while True:
            w_new = w - step * g.weights
            b_new = b - step * g.bias
            f_new = lr_objective(w_new, b_new, X, y, l2)
            if f_new <= f - 0.5 * step * sq or step < 1e-12:
                break
            step *= 0.5
        w, b, f = w_new, b_new, f_new
        b, f = _newton_bias(w, b, f, X, y, l2)
    g = lr_gradient(w, b, X, y, l2)
    norm = float(np.sqrt(np.dot(g.weights, g.weights) + g.bias * g.bias))
    if norm <= tol:
        return LogisticModel(w, b, max_iter)
    raise ConvergenceError(
        f"logistic regression did not converge in {max_iter} iterations "
        f"(gradient norm {norm:.3g} > tol {tol:g})", norm)
