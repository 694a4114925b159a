import os
import sys
from datetime import datetime, timedelta

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mhmort.cohort import CohortEntry  # noqa: E402
from mhmort.ehr_tables import (AdmissionRecord, DiagnosisRecord, PatientRecord,  # noqa: E402
                               PrescriptionRecord, ProcedureRecord, RawTables)

T0 = datetime(2150, 3, 1, 8, 0, 0)


def admission(hadm_id, subject_id, day, stay=5, **demo):
    admit = T0 + timedelta(days=day)
    return AdmissionRecord(hadm_id, subject_id, admit, admit + timedelta(days=stay), **demo)


def entry(subject_id, died=False, drugs=(), procs=(), hadm_id=None, **demo):
    demographics = {f: demo.pop(f, None)
                    for f in ("language", "marital_status", "religion", "insurance", "ethnicity")}
    return CohortEntry(subject_id, hadm_id or 1000 + subject_id, demographics,
                       frozenset(drugs), frozenset(procs), died, **demo)


@pytest.fixture
def two_patient_tables():
    """Patient 1 has a mental diagnosis and dies 10 days after discharge; patient 2 has none."""
    a1 = admission(11, 1, 0, insurance="Medicare", religion="CATHOLIC")
    a2 = admission(21, 2, 3, insurance="Private")
    return RawTables(
        patients=[PatientRecord(1, "M", datetime(2080, 1, 1), a1.discharge_time + timedelta(days=10)),
                  PatientRecord(2, "F", datetime(2090, 1, 1), None)],
        admissions=[a1, a2],
        diagnoses=[DiagnosisRecord(1, 11, "29620", 1), DiagnosisRecord(1, 11, "4019", 2),
                   DiagnosisRecord(2, 21, "4019", 1)],
        prescriptions=[PrescriptionRecord(1, 11, "004489", "Morphine"),
                       PrescriptionRecord(1, 11, None, "Uncoded"),
                       PrescriptionRecord(2, 21, "008209", "Pantoprazole")],
        procedures=[ProcedureRecord(1, 11, "9671"), ProcedureRecord(2, 21, "3893")],
    )
