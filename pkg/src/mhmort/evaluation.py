"""Shuffled k-fold cross-validation with per-fold ROC curves and AUC."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import classifiers
from .cohort import DEMOGRAPHIC_FEATURES, CohortEntry
from .features import fit_feature_space, labels, transform
from .rng import stream

MEAN_CURVE_POINTS = 101


class MetricError(ValueError):
    """A metric is undefined for the given labels (e.g. only one class)."""


class FoldError(RuntimeError):
    """A cross-validation fold could not be evaluated."""

    def __init__(self, fold: int, message: str):
        super().__init__(f"fold {fold}: {message}")
        self.fold = fold


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: np.ndarray  # row index -> fold id
    stratified: bool = False

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def kfold_split(n: int, k: int, seed: int, y=None, stratified: bool = False) -> FoldPlan:
    """Assign ``n`` shuffled rows to ``k`` folds whose sizes differ by at most one.

    Stratified mode deals each class round-robin (positives first), so both
    per-class and total fold sizes stay within one row of each other.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = stream(seed, "folds")
    assignment = np.empty(n, dtype=np.intp)
    if stratified:
        if y is None:
            raise ValueError("stratified split needs labels")
        y = np.asarray(y)
        if len(y) != n:
            raise ValueError("label count does not match n")
        order = np.concatenate([rng.permutation(np.flatnonzero(y == cls))
                                for cls in sorted(np.unique(y), reverse=True)])
        assignment[order] = np.arange(n) % k
    else:
        perm = rng.permutation(n)
        for fold, chunk in enumerate(np.array_split(perm, k)):
            assignment[chunk] = fold
    return FoldPlan(k, seed, assignment, stratified)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf (nothing predicted positive)


def roc_curve(scores, y) -> RocCurve:
    """One point per distinct score, thresholds descending; tied rows move together."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if scores.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC needs both classes in the labels")
    order = np.argsort(-scores, kind="stable")
    s, t = scores[order], (y[order] == 1)
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(t)[last]
    fp = (last + 1) - tp
    return RocCurve(np.r_[0.0, fp / n_neg], np.r_[0.0, tp / n_pos], np.r_[np.inf, s[last]])


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    f, t = curve.fpr, curve.tpr
    return float(np.sum((f[1:] - f[:-1]) * (t[1:] + t[:-1])) / 2.0)


def roc_auc(scores, y) -> float:
    return auc(roc_curve(scores, y))


def vertical_average(curves: Sequence[RocCurve], n_points: int = MEAN_CURVE_POINTS):
    """Mean TPR of ``curves`` sampled at evenly spaced FPR values.

    Each curve is read as the piecewise-linear path through its points;
    at a vertical jump the highest TPR is taken.
    """
    grid = np.linspace(0.0, 1.0, n_points)
    stacked = []
    for c in curves:
        idx = np.searchsorted(c.fpr, grid, side="right") - 1
        idx = np.clip(idx, 0, len(c.fpr) - 1)
        nxt = np.minimum(idx + 1, len(c.fpr) - 1)
        span = c.fpr[nxt] - c.fpr[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (grid - c.fpr[idx]) / span, 0.0)
        stacked.append(c.tpr[idx] + frac * (c.tpr[nxt] - c.tpr[idx]))
    return grid, np.mean(stacked, axis=0)


@dataclass
class AlgorithmResult:
    algorithm: str
    fold_aucs: list
    curves: list

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs))

    def mean_curve(self):
        return vertical_average(self.curves)


@dataclass
class EvalReport:
    k: int
    seed: int
    stratified: bool
    fit_global: bool
    results: dict = field(default_factory=dict)  # algorithm -> AlgorithmResult

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "stratified": self.stratified,
            "fit_global": self.fit_global,
            "algorithms": {
                name: {"fold_aucs": r.fold_aucs, "mean_auc": r.mean_auc}
                for name, r in self.results.items()
            },
        }


@dataclass(frozen=True)
class CVOptions:
    k: int = 5
    seed: int = 0
    stratified: bool = False
    fit_global: bool = False
    demographic_features: tuple = DEMOGRAPHIC_FEATURES


def fold_model_seed(seed: int, fold: int) -> int:
    return int(stream(seed, "model", fold).integers(0, 2 ** 63))


def cross_validate(spec: classifiers.ModelSpec, cohort: Sequence[CohortEntry],
                   options: CVOptions = CVOptions(),
                   fit_fn: Optional[Callable] = None,
                   plan: Optional[FoldPlan] = None) -> AlgorithmResult:
    """Evaluate ``spec`` on ``cohort`` fold by fold.

    Encoders are fitted on each fold's training rows unless
    ``options.fit_global`` is set. ``fit_fn(spec, X, y)`` replaces the
    library's :func:`classifiers.fit`, e.g. for stub models.
    """
    cohort = list(cohort)
    y = labels(cohort)
    if plan is None:
        plan = kfold_split(len(cohort), options.k, options.seed, y, options.stratified)
    fit_fn = fit_fn or classifiers.fit
    global_space = (fit_feature_space(cohort, options.demographic_features)
                    if options.fit_global else None)
    fold_aucs, curves = [], []
    for fold in range(plan.k):
        train, test = plan.train_indices(fold), plan.test_indices(fold)
        train_rows = [cohort[i] for i in train]
        test_rows = [cohort[i] for i in test]
        y_train, y_test = y[train], y[test]
        if len(np.unique(y_train)) < 2:
            raise FoldError(fold, "training rows contain a single class")
        if len(np.unique(y_test)) < 2:
            raise FoldError(fold, "test rows contain a single class; AUC undefined")
        space = global_space or fit_feature_space(train_rows, options.demographic_features)
        X_train = transform(space, train_rows)
        X_test = transform(space, test_rows)
        fold_spec = replace(spec, seed=fold_model_seed(spec.seed, fold))
        try:
            model = fit_fn(fold_spec, X_train, y_train)
        except classifiers.TrainingError as exc:
            raise FoldError(fold, str(exc)) from exc
        scores = classifiers.score(model, X_test)
        curve = roc_curve(scores, y_test)
        curves.append(curve)
        fold_aucs.append(auc(curve))
    return AlgorithmResult(spec.algorithm, fold_aucs, curves)


def evaluate(algorithms: Sequence[str], cohort: Sequence[CohortEntry],
             options: CVOptions = CVOptions(), hyperparameters: Optional[dict] = None) -> EvalReport:
    """Cross-validate several algorithms over one shared fold plan."""
    cohort = list(cohort)
    plan = kfold_split(len(cohort), options.k, options.seed, labels(cohort), options.stratified)
    report = EvalReport(options.k, options.seed, options.stratified, options.fit_global)
    for name in algorithms:
        spec = classifiers.ModelSpec(name, (hyperparameters or {}).get(name, {}), options.seed)
        report.results[spec.algorithm] = cross_validate(spec, cohort, options, plan=plan)
    return report


# -- exports -----------------------------------------------------------------


def write_report_json(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


def write_roc_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ALGORITHM", "FOLD", "FPR", "TPR", "THRESHOLD"])
        for name, result in report.results.items():
            for fold, c in enumerate(result.curves):
                for f, t, th in zip(c.fpr, c.tpr, c.thresholds):
                    writer.writerow([name, fold, repr(float(f)), repr(float(t)), repr(float(th))])


def write_mean_roc_csv(report: EvalReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ALGORITHM", "FPR", "MEAN_TPR"])
        for name, result in report.results.items():
            grid, tpr = result.mean_curve()
            for f, t in zip(grid, tpr):
                writer.writerow([name, repr(float(f)), repr(float(t))])
