"""Four from-scratch classifiers behind one ``fit`` / ``score`` interface.

Every model returns continuous risk scores where higher means more likely
to die, which is all ROC analysis needs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .base import ConvergenceError, TrainingError, as_array, as_labels
from .forest import ForestModel, best_split, build_tree, fit_forest, gini_impurity
from .knn import KNNModel, fit_knn
from .logistic import LogisticModel, fit_logistic, lr_gradient, lr_objective, sigmoid
from .svm import SVMModel, rbf_kernel, scale_gamma, smo_train

MODEL_FORMAT_VERSION = 1

ALGORITHMS = ("logistic_regression", "random_forest", "svm_rbf", "knn")
SHORT_NAMES = {"lr": "logistic_regression", "rf": "random_forest", "svm": "svm_rbf", "knn": "knn"}

DEFAULT_HYPERPARAMETERS = {
    "logistic_regression": {"l2": 1.0, "learning_rate": 0.1, "max_iter": 1000, "tol": 1e-6},
    "random_forest": {"n_trees": 100, "max_features": "sqrt", "bootstrap": True,
                      "max_depth": None, "min_leaf": 1},
    "svm_rbf": {"c": 1.0, "gamma": "scale", "tol": 1e-3, "max_passes": 100},
    "knn": {"k": 5},
}

TrainedModel = Union[LogisticModel, ForestModel, SVMModel, KNNModel]
_MODEL_TYPES = {cls.algorithm: cls for cls in (LogisticModel, ForestModel, SVMModel, KNNModel)}


def canonical_algorithm(name: str) -> str:
    name = SHORT_NAMES.get(name, name)
    if name not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {name!r}; expected one of "
                         f"{', '.join(list(SHORT_NAMES) + list(ALGORITHMS))}")
    return name


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        algo = canonical_algorithm(self.algorithm)
        object.__setattr__(self, "algorithm", algo)
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[algo])
        if unknown:
            raise ValueError(f"unknown hyperparameters for {algo}: {sorted(unknown)}")
        merged = {**DEFAULT_HYPERPARAMETERS[algo], **self.hyperparameters}
        object.__setattr__(self, "hyperparameters", merged)
        if algo == "svm_rbf" and not merged["c"] > 0:
            raise ValueError("svm_rbf requires c > 0")
        if algo == "knn" and int(merged["k"]) < 1:
            raise ValueError("knn requires k >= 1")
        if algo == "random_forest" and int(merged["n_trees"]) < 1:
            raise ValueError("random_forest requires n_trees >= 1")


def fit(spec: ModelSpec, X, y) -> TrainedModel:
    X = as_array(X)
    y = as_labels(y)
    if X.shape[0] != len(y):
        raise ValueError(f"{X.shape[0]} rows but {len(y)} labels")
    if len(y) < 2:
        raise TrainingError("need at least two training rows")
    hp = spec.hyperparameters
    if spec.algorithm == "logistic_regression":
        return fit_logistic(X, y, hp["l2"], hp["learning_rate"], hp["max_iter"], hp["tol"])
    if spec.algorithm == "random_forest":
        return fit_forest(X, y, hp["n_trees"], hp["max_features"], hp["bootstrap"],
                          hp["max_depth"], hp["min_leaf"], spec.seed)
    if spec.algorithm == "svm_rbf":
        gamma = None if hp["gamma"] == "scale" else float(hp["gamma"])
        return smo_train(X, y, hp["c"], gamma, hp["tol"], hp["max_passes"])
    return fit_knn(X, y, hp["k"])


def score(model: TrainedModel, X) -> np.ndarray:
    scores = model.score(as_array(X))
    return np.asarray(scores, dtype=np.float64)


def model_to_json(model: TrainedModel, spec: ModelSpec | None = None) -> str:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "algorithm": model.algorithm,
        "hyperparameters": spec.hyperparameters if spec else None,
        "seed": spec.seed if spec else None,
        "params": model.params(),
    }
    return json.dumps(doc)


def model_from_json(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    return _MODEL_TYPES[doc["algorithm"]].from_params(doc["params"])


__all__ = [
    "ALGORITHMS", "ConvergenceError", "ForestModel", "KNNModel", "LogisticModel", "ModelSpec",
    "SVMModel", "TrainedModel", "TrainingError", "best_split", "build_tree", "canonical_algorithm",
    "fit", "fit_forest", "fit_knn", "fit_logistic", "gini_impurity", "lr_gradient", "lr_objective",
    "model_from_json", "model_to_json", "rbf_kernel", "scale_gamma", "score", "sigmoid", "smo_train",
]
