from datetime import datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhmort.ehr_tables import (PatientRecord, PrescriptionRecord, RawTables, RowError, SchemaError,
                               TABLE_FILES, is_mental_disease_code, load_tables, parse_table,
                               save_tables, validate_referential_integrity, write_table)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_patients_with_empty_dod(tmp_path):
    p = write(tmp_path / "PATIENTS.csv",
              "SUBJECT_ID,GENDER,DOB,DOD\n"
              "1,M,2080-01-01 00:00:00,2150-05-02 00:00:00\n"
              "2,F,2090-06-15 00:00:00,\n")
    recs = parse_table(p, "patients")
    assert len(recs) == 2
    assert recs[0].dod == datetime(2150, 5, 2)
    assert recs[1].dod is None


def test_header_only_gives_empty_table(tmp_path):
    p = write(tmp_path / "PATIENTS.csv", "SUBJECT_ID,GENDER,DOB,DOD\n")
    assert parse_table(p, "patients") == []


def test_blank_gsn_is_flagged_droppable(tmp_path):
    p = write(tmp_path / "PRESCRIPTIONS.csv",
              "SUBJECT_ID,HADM_ID,DRUG,GSN\n1,11,Morphine Sulfate,004489\n1,11,Saline,\n")
    recs = parse_table(p, "prescriptions")
    assert [r.gsn for r in recs] == ["004489", None]
    assert [r.droppable for r in recs] == [False, True]


def test_header_case_insensitive_and_extra_columns_ignored(tmp_path):
    p = write(tmp_path / "PROCEDURES_ICD.csv",
              "row_id,subject_id,hadm_id,seq_num,icd9_code\n7,1,11,1,9671\n")
    (rec,) = parse_table(p, "procedures")
    assert rec.icd9_proc_code == "9671"


def test_null_tokens_map_to_absent(tmp_path):
    p = write(tmp_path / "ADMISSIONS.csv",
              "SUBJECT_ID,HADM_ID,ADMITTIME,DISCHTIME,ADMISSION_TYPE,INSURANCE,LANGUAGE,"
              "RELIGION,MARITAL_STATUS,ETHNICITY\n"
              '1,11,2150-01-01 10:00:00,2150-01-05 10:00:00,EMERGENCY,Medicare,NULL,"  ",,WHITE\n')
    (rec,) = parse_table(p, "admissions")
    assert rec.language is None and rec.religion is None and rec.marital_status is None
    assert rec.ethnicity == "WHITE"


def test_missing_column_names_it(tmp_path):
    p = write(tmp_path / "PATIENTS.csv", "SUBJECT_ID,GENDER,DOD\n1,M,\n")
    with pytest.raises(SchemaError, match="DOB"):
        parse_table(p, "patients")


@pytest.mark.parametrize("row,msg", [
    ("x,M,2080-01-01 00:00:00,", "line 3"),
    ("2,M,01/01/2080,", "line 3"),
])
def test_bad_rows_strict_and_lenient(tmp_path, row, msg):
    p = write(tmp_path / "PATIENTS.csv",
              f"SUBJECT_ID,GENDER,DOB,DOD\n1,F,2080-01-01 00:00:00,\n{row}\n3,M,2070-01-01 00:00:00,\n")
    with pytest.raises(RowError, match=msg) as err:
        parse_table(p, "patients", strict=True)
    assert err.value.line == 3
    recs = parse_table(p, "patients", strict=False)
    assert [r.subject_id for r in recs] == [1, 3]
    assert len(recs.skipped) == 1 and recs.skipped[0].line == 3


def test_rfc4180_quoting_round_trip(tmp_path):
    recs = [PrescriptionRecord(1, 11, "000123", 'Drug, "quoted"\nsecond line')]
    p = tmp_path / "PRESCRIPTIONS.csv"
    write_table(recs, p, "prescriptions")
    assert parse_table(p, "prescriptions") == recs


def test_bundle_round_trip(tmp_path, two_patient_tables):
    save_tables(two_patient_tables, tmp_path)
    assert sorted(f.name for f in tmp_path.iterdir()) == sorted(TABLE_FILES.values())
    assert load_tables(tmp_path) == two_patient_tables


_timestamps = st.datetimes(min_value=datetime(1900, 1, 1), max_value=datetime(2200, 1, 1)).map(
    lambda d: d.replace(microsecond=0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["M", "F"]), _timestamps, st.one_of(st.none(), _timestamps)),
                max_size=20))
def test_patients_round_trip_property(tmp_path_factory, rows):
    recs = [PatientRecord(i + 1, g, dob, None if dod is None else max(dod, dob))
            for i, (g, dob, dod) in enumerate(rows)]
    p = tmp_path_factory.mktemp("rt") / "PATIENTS.csv"
    write_table(recs, p, "patients")
    parsed = parse_table(p, "patients")
    assert parsed == recs
    assert len(parsed) == len(rows)


def test_referential_integrity_clean(two_patient_tables):
    assert validate_referential_integrity(two_patient_tables) == []


def test_dangling_diagnosis_hadm(two_patient_tables):
    t = two_patient_tables
    from mhmort.ehr_tables import DiagnosisRecord
    bad = RawTables(t.patients, t.admissions, t.diagnoses + [DiagnosisRecord(1, 999, "311", 1)],
                    t.prescriptions, t.procedures)
    (v,) = validate_referential_integrity(bad)
    assert (v.table, v.row, v.column, v.value) == ("diagnoses", 3, "HADM_ID", 999)


def test_prescription_with_unknown_subject_known_hadm(two_patient_tables):
    t = two_patient_tables
    bad = RawTables(t.patients, t.admissions, t.diagnoses,
                    t.prescriptions + [PrescriptionRecord(77, 11, "000001", "X")], t.procedures)
    (v,) = validate_referential_integrity(bad)
    assert (v.table, v.column, v.value) == ("prescriptions", "SUBJECT_ID", 77)


@pytest.mark.parametrize("code,expected", [
    ("29620", True), ("4019", False), ("V1581", False), ("E9500", False),
    ("290", True), ("319", True), ("2899", False), ("3200", False), ("296.20", True),
])
def test_mental_disease_codes(code, expected):
    assert is_mental_disease_code(code) is expected


def test_mental_disease_bruteforce_over_prefixes():
    suffixes = ["", "0", "1", "9", "00", "20", "99"]
    for prefix in range(280, 330):
        for s in suffixes:
            assert is_mental_disease_code(f"{prefix}{s}") is (290 <= prefix <= 319)
    for s in suffixes:
        assert not is_mental_disease_code(f"V29{s}")
        assert not is_mental_disease_code(f"E30{s}")
