from __future__ import annotations

import numpy as np


class TrainingError(ValueError):
    """Model fitting cannot proceed on the given data."""


class ConvergenceError(TrainingError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""

    def __init__(self, message: str, final_tolerance: float, violations: int | None = None):
        super().__init__(message)
        self.final_tolerance = final_tolerance
        self.violations = violations


def as_array(X) -> np.ndarray:
    """Accept a FeatureMatrix or array-like and return a float64 2-D array."""
    rows = getattr(X, "rows", X)
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def as_labels(y) -> np.ndarray:
    arr = np.asarray(y).astype(np.int64).ravel()
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return arr


def check_width(X: np.ndarray, width: int) -> None:
    if X.shape[1] != width:
        raise ValueError(f"model was trained on {width} features, got {X.shape[1]}")
