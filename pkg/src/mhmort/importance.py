"""Permutation feature importance measured as the drop in ROC-AUC."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import classifiers
from .classifiers.base import as_array
from .evaluation import roc_auc
from .rng import stream


@dataclass(frozen=True)
class FeatureImportance:
    feature: str
    mean: float
    std: float


@dataclass
class ImportanceReport:
    rows: list  # FeatureImportance, most important first
    n_repeats: int
    seed: int
    metric: str = "roc_auc"
    baseline: float = float("nan")
    per_repeat: Optional[np.ndarray] = field(default=None, repr=False)  # (d, n_repeats)

    def __len__(self):
        return len(self.rows)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "baseline": self.baseline,
            "n_repeats": self.n_repeats,
            "seed": self.seed,
            "features": [{"feature": r.feature, "mean_importance": r.mean, "std": r.std}
                         for r in self.rows],
        }


def _ranked(rows):
    return sorted(rows, key=lambda r: (-r.mean, r.feature))


def permutation_importance(model, X, y, n_repeats: int = 5, seed: int = 0,
                           feature_names: Optional[Sequence[str]] = None) -> ImportanceReport:
    """Baseline AUC minus the AUC after shuffling one column, per repeat.

    Column ``j`` in repeat ``r`` is shuffled with its own stream keyed by
    ``(j, r)``. Columns a forest never splits on are skipped: shuffling them
    cannot change any score, so their importance is exactly zero.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    names = list(feature_names if feature_names is not None else getattr(X, "column_names", []))
    X = as_array(X)
    y = np.asarray(y)
    d = X.shape[1]
    if not names:
        names = [f"x{j}" for j in range(d)]
    if len(names) != d:
        raise ValueError("feature name count does not match matrix width")
    forest = isinstance(model, classifiers.ForestModel)
    if forest:
        # vote sums are exact integers, so swapping in re-scored trees is bit-identical
        base_votes = model.tree_votes(X)
        base_total = base_votes.sum(axis=0)
        baseline = roc_auc(base_total / len(model.trees), y)
    else:
        baseline = roc_auc(classifiers.score(model, X), y)

    used = model.used_features() if forest else None
    drops = np.zeros((d, n_repeats))
    work = X.copy()
    for j in range(d):
        if used is not None and j not in used:
            continue
        column = X[:, j]
        if np.all(column == column[0]):
            continue
        trees = model.trees_using(j) if forest else None
        for r in range(n_repeats):
            work[:, j] = stream(seed, "permutation", j, r).permutation(column)
            if forest:
                total = (base_total - base_votes[trees].sum(axis=0)
                         + model.tree_votes(work, trees).sum(axis=0))
                scores = total / len(model.trees)
            else:
                scores = classifiers.score(model, work)
            drops[j, r] = baseline - roc_auc(scores, y)
        work[:, j] = column
    rows = [FeatureImportance(names[j], float(drops[j].mean()), float(drops[j].std()))
            for j in range(d)]
    return ImportanceReport(_ranked(rows), n_repeats, seed, baseline=baseline, per_repeat=drops)


def top_features(report: ImportanceReport, k: int) -> ImportanceReport:
    if k < 1:
        raise ValueError("k must be >= 1")
    return ImportanceReport(_ranked(report.rows)[:k], report.n_repeats, report.seed,
                            report.metric, report.baseline)


def load_code_names(path) -> dict:
    """Read a CODE,NAME lookup table."""
    names = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = {f.strip().upper(): f for f in reader.fieldnames or []}
        if "CODE" not in fields or "NAME" not in fields:
            raise ValueError(f"{path}: expected CODE and NAME columns")
        for row in reader:
            names[row[fields["CODE"]].strip()] = row[fields["NAME"]].strip()
    return names


def readable_names(column_names: Sequence[str], code_names: Optional[dict]) -> list[str]:
    """Swap ``drug:``/``proc:`` codes for lookup names where available."""
    if not code_names:
        return list(column_names)
    out = []
    for name in column_names:
        prefix, _, code = name.partition(":")
        if prefix in ("drug", "proc") and code in code_names:
            out.append(f"{prefix}:{code_names[code]}")
        else:
            out.append(name)
    return out


def write_importance_csv(report: ImportanceReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["FEATURE", "MEAN_IMPORTANCE", "STD", "N_REPEATS"])
        for r in report.rows:
            writer.writerow([r.feature, repr(r.mean), repr(r.std), report.n_repeats])


def write_importance_json(report: ImportanceReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
