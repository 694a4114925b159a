"""Cohort extraction: one index admission per patient plus a 30-day mortality label."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Optional

from .ehr_tables import AdmissionRecord, DiagnosisRecord, RawTables, is_mental_disease_code

MORTALITY_WINDOW = timedelta(days=30)

# Features fed to the models, in column order.
DEMOGRAPHIC_FEATURES = ("language", "marital_status", "religion", "insurance", "ethnicity")
# Features summarised for exploratory bar charts.
EDA_FEATURES = ("gender", "marital_status", "insurance", "admission_type",
                "religion", "ethnicity", "language")
MISSING_CATEGORY = "(missing)"


@dataclass(frozen=True)
class CohortEntry:
    subject_id: int
    hadm_id: int
    demographics: dict = field(hash=False)
    drug_codes: frozenset = frozenset()
    procedure_codes: frozenset = frozenset()
    died_within_30d: bool = False
    gender: Optional[str] = None
    admission_type: Optional[str] = None

    def attribute(self, feature: str) -> Optional[str]:
        if feature in DEMOGRAPHIC_FEATURES:
            return self.demographics.get(feature)
        if feature in ("gender", "admission_type"):
            return getattr(self, feature)
        raise ValueError(f"unknown feature {feature!r}; expected one of {', '.join(EDA_FEATURES)}")


@dataclass(frozen=True)
class CohortSummary:
    n_patients: int
    n_died: int
    n_survived: int
    mortality_rate: float

    @classmethod
    def of(cls, cohort: list[CohortEntry]) -> "CohortSummary":
        n = len(cohort)
        died = sum(e.died_within_30d for e in cohort)
        return cls(n, died, n - died, died / n if n else 0.0)


def select_index_admission(admissions: Iterable[AdmissionRecord],
                           diagnoses: Iterable[DiagnosisRecord]) -> Optional[int]:
    """Earliest admission carrying at least one mental-disorder diagnosis."""
    qualifying = {d.hadm_id for d in diagnoses if is_mental_disease_code(d.icd9_code)}
    candidates = [a for a in admissions if a.hadm_id in qualifying]
    if not candidates:
        return None
    return min(candidates, key=lambda a: (a.admit_time, a.hadm_id)).hadm_id


def label_mortality(dod: Optional[datetime], discharge_time: datetime) -> bool:
    """Death on or before discharge + 30 days; in-hospital deaths count."""
    return dod is not None and dod <= discharge_time + MORTALITY_WINDOW


def build_cohort(tables: RawTables) -> list[CohortEntry]:
    cohort = []
    for patient in sorted(tables.patients, key=lambda p: p.subject_id):
        admissions = tables.admissions_of(patient.subject_id)
        if not admissions:
            continue
        diagnoses = [d for a in admissions for d in tables.diagnoses_of(a.hadm_id)]
        hadm_id = select_index_admission(admissions, diagnoses)
        if hadm_id is None:
            continue
        adm = tables.admission(hadm_id)
        drugs = frozenset(p.gsn for p in tables.prescriptions_of(hadm_id) if not p.droppable)
        procs = frozenset(p.icd9_proc_code for p in tables.procedures_of(hadm_id))
        cohort.append(CohortEntry(
            subject_id=patient.subject_id,
            hadm_id=hadm_id,
            demographics={f: getattr(adm, f) for f in DEMOGRAPHIC_FEATURES},
            drug_codes=drugs,
            procedure_codes=procs,
            died_within_30d=label_mortality(patient.dod, adm.discharge_time),
            gender=patient.gender,
            admission_type=adm.admission_type,
        ))
    return cohort


def summarize_mortality_by(cohort: list[CohortEntry], feature: str,
                           top_k: Optional[int] = None) -> list[tuple[str, int, int]]:
    """Deaths and survivors per category, most deaths first.

    Ties on deaths fall back to larger category size, then name. Absent
    values are counted under ``MISSING_CATEGORY``.
    """
    if feature not in EDA_FEATURES:
        raise ValueError(f"unknown feature {feature!r}; expected one of {', '.join(EDA_FEATURES)}")
    counts: dict[str, list[int]] = {}
    for entry in cohort:
        value = entry.attribute(feature)
        key = MISSING_CATEGORY if value is None else value
        bucket = counts.setdefault(key, [0, 0])
        bucket[0 if entry.died_within_30d else 1] += 1
    rows = sorted(((k, d, s) for k, (d, s) in counts.items()),
                  key=lambda r: (-r[1], -(r[1] + r[2]), r[0]))
    return rows if top_k is None else rows[:top_k]


# -- exports -----------------------------------------------------------------


def write_cohort_csv(cohort: list[CohortEntry], path) -> None:
    demo_cols = [f.upper() for f in DEMOGRAPHIC_FEATURES]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["SUBJECT_ID", "HADM_ID", "LABEL", *demo_cols,
                         "GENDER", "ADMISSION_TYPE", "DRUG_CODES", "PROCEDURE_CODES"])
        for e in cohort:
            writer.writerow([
                e.subject_id, e.hadm_id, int(e.died_within_30d),
                *(e.demographics.get(f) or "" for f in DEMOGRAPHIC_FEATURES),
                e.gender or "", e.admission_type or "",
                "|".join(sorted(e.drug_codes)), "|".join(sorted(e.procedure_codes)),
            ])


def write_summary_json(summary: CohortSummary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({
            "n_patients": summary.n_patients,
            "n_died": summary.n_died,
            "n_survived": summary.n_survived,
            "mortality_rate": summary.mortality_rate,
        }, fh, indent=2)
        fh.write("\n")


def write_eda_csv(rows: list[tuple[str, int, int]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["CATEGORY", "DIED", "SURVIVED"])
        writer.writerows(rows)
