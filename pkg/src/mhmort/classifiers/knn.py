"""Brute-force k-nearest-neighbour scorer (Euclidean, ties to the lower row index)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import check_width

_CHUNK_ELEMENTS = 1 << 22


def _is_integral(*arrays) -> bool:
    return all(np.array_equal(a, np.round(a)) and np.abs(a).max(initial=0) < 2 ** 20
               for a in arrays)


def squared_distances(Q: np.ndarray, X: np.ndarray) -> np.ndarray:
    """All-pairs squared distances.

    Integer-valued inputs use the dot-product expansion, which is exact in
    float64 there; anything else takes explicit differences so neighbour
    order is never perturbed by cancellation.
    """
    if _is_integral(Q, X):
        sq = (Q * Q).sum(1)[:, None] + (X * X).sum(1)[None, :] - 2.0 * (Q @ X.T)
        return sq
    out = np.empty((Q.shape[0], X.shape[0]))
    step = max(1, _CHUNK_ELEMENTS // max(X.size, 1))
    for s in range(0, Q.shape[0], step):
        diff = Q[s:s + step, None, :] - X[None, :, :]
        out[s:s + step] = (diff * diff).sum(-1)
    return out


@dataclass(frozen=True)
class KNNModel:
    X: np.ndarray
    y: np.ndarray
    k: int = 5

    algorithm = "knn"

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def neighbours(self, Q: np.ndarray) -> np.ndarray:
        check_width(Q, self.width)
        k = min(self.k, self.X.shape[0])
        out = np.empty((Q.shape[0], k), dtype=np.intp)
        step = max(1, _CHUNK_ELEMENTS // max(self.X.shape[0], 1))
        for s in range(0, Q.shape[0], step):
            D = squared_distances(Q[s:s + step], self.X)
            out[s:s + step] = np.argsort(D, axis=1, kind="stable")[:, :k]
        return out

    def score(self, Q: np.ndarray) -> np.ndarray:
        """Fraction of the k nearest training rows labelled 1."""
        return self.y[self.neighbours(Q)].mean(axis=1)

    def params(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "k": self.k}

    @classmethod
    def from_params(cls, params: dict) -> "KNNModel":
        y = np.asarray(params["y"], dtype=np.float64)
        X = np.asarray(params["X"], dtype=np.float64).reshape(len(y), -1)
        return cls(X, y, int(params["k"]))


def fit_knn(X: np.ndarray, y: np.ndarray, k: int = 5) -> KNNModel:
    if k < 1:
        raise ValueError("k must be >= 1")
    return KNNModel(np.array(X, dtype=np.float64), np.asarray(y, dtype=np.float64), int(k))
