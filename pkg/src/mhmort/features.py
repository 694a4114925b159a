"""Most-frequent imputation, one-hot demographics and multi-label code indicators."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cohort import DEMOGRAPHIC_FEATURES, CohortEntry


@dataclass(frozen=True)
class FeatureSpace:
    demographic_categories: dict  # feature -> sorted category list
    fill_values: dict  # feature -> modal value (None if never observed)
    drug_vocabulary: tuple
    procedure_vocabulary: tuple

    @property
    def features(self) -> tuple:
        return tuple(self.demographic_categories)

    @property
    def column_names(self) -> list[str]:
        names = [f"{f}={c}" for f, cats in self.demographic_categories.items() for c in cats]
        names += [f"drug:{g}" for g in self.drug_vocabulary]
        names += [f"proc:{p}" for p in self.procedure_vocabulary]
        return names

    @property
    def width(self) -> int:
        return (sum(len(c) for c in self.demographic_categories.values())
                + len(self.drug_vocabulary) + len(self.procedure_vocabulary))


@dataclass
class FeatureMatrix:
    column_names: list
    rows: np.ndarray  # (n, d) uint8, entries in {0, 1}
    row_ids: list

    @property
    def shape(self) -> tuple:
        return self.rows.shape

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx)
        return FeatureMatrix(self.column_names, self.rows[idx], [self.row_ids[i] for i in idx])


def _modal(values: list[str]) -> Optional[str]:
    if not values:
        return None
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def fit_feature_space(cohort: Sequence[CohortEntry],
                      demographic_features: Sequence[str] = DEMOGRAPHIC_FEATURES) -> FeatureSpace:
    """Learn category lists, fill values and code vocabularies from ``cohort``.

    Fill values are the modal observed value with ties going to the
    lexicographically smallest. Labels are never consulted.
    """
    if not cohort:
        raise ValueError("cannot fit a feature space on an empty cohort")
    categories, fills = {}, {}
    for feature in demographic_features:
        observed = [v for v in (e.attribute(feature) for e in cohort) if v is not None]
        categories[feature] = sorted(set(observed))
        fills[feature] = _modal(observed)
    drugs = sorted({g for e in cohort for g in e.drug_codes})
    procs = sorted({p for e in cohort for p in e.procedure_codes})
    return FeatureSpace(categories, fills, tuple(drugs), tuple(procs))


def transform(space: FeatureSpace, cohort: Sequence[CohortEntry]) -> FeatureMatrix:
    """Encode ``cohort`` over a fitted space.

    Values or codes unseen at fit time contribute no 1s.
    """
    column = {}
    offset = 0
    for feature, cats in space.demographic_categories.items():
        for j, c in enumerate(cats):
            column[(feature, c)] = offset + j
        offset += len(cats)
    drug_col = {g: offset + j for j, g in enumerate(space.drug_vocabulary)}
    offset += len(space.drug_vocabulary)
    proc_col = {p: offset + j for j, p in enumerate(space.procedure_vocabulary)}

    X = np.zeros((len(cohort), space.width), dtype=np.uint8)
    for i, entry in enumerate(cohort):
        for feature in space.demographic_categories:
            value = entry.attribute(feature)
            if value is None:
                value = space.fill_values[feature]
            j = column.get((feature, value))
            if j is not None:
                X[i, j] = 1
        for g in entry.drug_codes:
            j = drug_col.get(g)
            if j is not None:
                X[i, j] = 1
        for p in entry.procedure_codes:
            j = proc_col.get(p)
            if j is not None:
                X[i, j] = 1
    return FeatureMatrix(space.column_names, X, [e.subject_id for e in cohort])


def labels(cohort: Sequence[CohortEntry]) -> np.ndarray:
    return np.array([int(e.died_within_30d) for e in cohort], dtype=np.int8)


def write_matrix_csv(matrix: FeatureMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["SUBJECT_ID", *matrix.column_names])
        for sid, row in zip(matrix.row_ids, matrix.rows):
            writer.writerow([sid, *row.tolist()])
