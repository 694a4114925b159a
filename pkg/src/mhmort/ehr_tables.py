"""MIMIC-III-shaped data model and CSV ingestion for the five input tables."""

from __future__ import annotations

import csv
import os
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Iterable, Optional

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
NULL_TOKENS = {"", "NULL"}

TABLE_FILES = {
    "patients": "PATIENTS.csv",
    "admissions": "ADMISSIONS.csv",
    "diagnoses": "DIAGNOSES_ICD.csv",
    "prescriptions": "PRESCRIPTIONS.csv",
    "procedures": "PROCEDURES_ICD.csv",
}


class SchemaError(ValueError):
    """A table is missing a required column (or the table kind is unknown)."""


class RowError(ValueError):
    """A data row could not be converted into a record."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class PatientRecord:
    subject_id: int
    gender: str
    dob: datetime
    dod: Optional[datetime] = None


@dataclass(frozen=True)
class AdmissionRecord:
    hadm_id: int
    subject_id: int
    admit_time: datetime
    discharge_time: datetime
    admission_type: Optional[str] = None
    insurance: Optional[str] = None
    language: Optional[str] = None
    religion: Optional[str] = None
    marital_status: Optional[str] = None
    ethnicity: Optional[str] = None


@dataclass(frozen=True)
class DiagnosisRecord:
    subject_id: int
    hadm_id: int
    icd9_code: str
    seq_num: int


@dataclass(frozen=True)
class PrescriptionRecord:
    subject_id: int
    hadm_id: int
    gsn: Optional[str]
    drug_name: str = ""

    @property
    def droppable(self) -> bool:
        """Rows without a GSN carry no usable drug code."""
        return self.gsn is None


@dataclass(frozen=True)
class ProcedureRecord:
    subject_id: int
    hadm_id: int
    icd9_proc_code: str


# -- cell converters ---------------------------------------------------------


def _clean(cell: Optional[str]) -> Optional[str]:
    if cell is None:
        return None
    text = cell.strip()
    if text.upper() in NULL_TOKENS:
        return None
    return text


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return value


def _timestamp(text: str) -> datetime:
    for fmt in (TIMESTAMP_FORMAT, "%Y-%m-%d"):
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            pass
    raise ValueError(f"unparseable timestamp {text!r}")


def _format_timestamp(value: Optional[datetime]) -> str:
    return "" if value is None else value.strftime(TIMESTAMP_FORMAT)


@dataclass(frozen=True)
class _Column:
    header: str
    attr: Optional[str]  # None: required in the header but not stored
    convert: Callable[[str], object] = str
    required: bool = True


_SCHEMAS: dict[str, tuple[type, tuple[_Column, ...]]] = {
    "patients": (PatientRecord, (
        _Column("SUBJECT_ID", "subject_id", _positive_int),
        _Column("GENDER", "gender"),
        _Column("DOB", "dob", _timestamp),
        _Column("DOD", "dod", _timestamp, required=False),
    )),
    "admissions": (AdmissionRecord, (
        _Column("SUBJECT_ID", "subject_id", _positive_int),
        _Column("HADM_ID", "hadm_id", _positive_int),
        _Column("ADMITTIME", "admit_time", _timestamp),
        _Column("DISCHTIME", "discharge_time", _timestamp),
        _Column("ADMISSION_TYPE", "admission_type", required=False),
        _Column("INSURANCE", "insurance", required=False),
        _Column("LANGUAGE", "language", required=False),
        _Column("RELIGION", "religion", required=False),
        _Column("MARITAL_STATUS", "marital_status", required=False),
        _Column("ETHNICITY", "ethnicity", required=False),
    )),
    "diagnoses": (DiagnosisRecord, (
        _Column("SUBJECT_ID", "subject_id", _positive_int),
        _Column("HADM_ID", "hadm_id", _positive_int),
        _Column("SEQ_NUM", "seq_num", _positive_int),
        _Column("ICD9_CODE", "icd9_code"),
    )),
    "prescriptions": (PrescriptionRecord, (
        _Column("SUBJECT_ID", "subject_id", _positive_int),
        _Column("HADM_ID", "hadm_id", _positive_int),
        _Column("DRUG", "drug_name", required=False),
        _Column("GSN", "gsn", required=False),
    )),
    "procedures": (ProcedureRecord, (
        _Column("SUBJECT_ID", "subject_id", _positive_int),
        _Column("HADM_ID", "hadm_id", _positive_int),
        _Column("SEQ_NUM", None, required=False),
        _Column("ICD9_CODE", "icd9_proc_code"),
    )),
}


def _schema(kind: str):
    try:
        return _SCHEMAS[kind]
    except KeyError:
        raise SchemaError(f"unknown table kind {kind!r}") from None


def _check_invariants(kind: str, rec) -> None:
    if kind == "patients" and rec.dod is not None and rec.dod < rec.dob:
        raise ValueError("DOD precedes DOB")
    if kind == "admissions" and rec.discharge_time < rec.admit_time:
        raise ValueError("DISCHTIME precedes ADMITTIME")


class Table(list):
    """Parsed records; ``skipped`` holds the row errors dropped in lenient mode."""

    def __init__(self, records: Iterable = (), skipped: Iterable[RowError] = ()):
        super().__init__(records)
        self.skipped = list(skipped)


def parse_table(path, kind: str, strict: bool = True) -> Table:
    """Parse one CSV table into immutable records.

    Header names are matched case-insensitively and extra columns are
    ignored. In strict mode the first bad row raises :class:`RowError`;
    otherwise bad rows are skipped and collected on ``Table.skipped``.
    """
    record_type, columns = _schema(kind)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, no header row") from None
        positions = {name.strip().upper(): i for i, name in enumerate(header)}
        for col in columns:
            if col.header not in positions:
                raise SchemaError(f"{path}: missing required column {col.header}")

        table = Table()
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            try:
                values = {}
                for col in columns:
                    i = positions[col.header]
                    cell = _clean(row[i]) if i < len(row) else None
                    if col.attr is None:
                        continue
                    if cell is None:
                        if col.required:
                            raise ValueError(f"{col.header} is empty")
                        values[col.attr] = "" if col.attr == "drug_name" else None
                    else:
                        values[col.attr] = col.convert(cell)
                rec = record_type(**values)
                _check_invariants(kind, rec)
            except ValueError as exc:
                err = RowError(str(exc), line)
                if strict:
                    raise err from None
                table.skipped.append(err)
                continue
            table.append(rec)
    return table


def write_table(records: Iterable, path, kind: str) -> None:
    """Write records in the same CSV layout :func:`parse_table` reads."""
    _, columns = _schema(kind)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([c.header for c in columns])
        seq: dict[int, int] = defaultdict(int)
        for rec in records:
            row = []
            for col in columns:
                if col.attr is None:
                    seq[rec.hadm_id] += 1
                    row.append(str(seq[rec.hadm_id]))
                    continue
                value = getattr(rec, col.attr)
                if value is None:
                    row.append("")
                elif isinstance(value, datetime):
                    row.append(_format_timestamp(value))
                else:
                    row.append(str(value))
            writer.writerow(row)


@dataclass
class RawTables:
    patients: list[PatientRecord] = field(default_factory=list)
    admissions: list[AdmissionRecord] = field(default_factory=list)
    diagnoses: list[DiagnosisRecord] = field(default_factory=list)
    prescriptions: list[PrescriptionRecord] = field(default_factory=list)
    procedures: list[ProcedureRecord] = field(default_factory=list)

    def __post_init__(self):
        self._index = None

    def _build_index(self):
        by_subject = defaultdict(list)
        for adm in self.admissions:
            by_subject[adm.subject_id].append(adm)
        children = {}
        for name in ("diagnoses", "prescriptions", "procedures"):
            grouped = defaultdict(list)
            for rec in getattr(self, name):
                grouped[rec.hadm_id].append(rec)
            children[name] = grouped
        self._index = {
            "patients": {p.subject_id: p for p in self.patients},
            "admissions": {a.hadm_id: a for a in self.admissions},
            "admissions_by_subject": by_subject,
            **children,
        }
        return self._index

    @property
    def index(self) -> dict:
        return self._index if self._index is not None else self._build_index()

    def patient(self, subject_id: int) -> Optional[PatientRecord]:
        return self.index["patients"].get(subject_id)

    def admission(self, hadm_id: int) -> Optional[AdmissionRecord]:
        return self.index["admissions"].get(hadm_id)

    def admissions_of(self, subject_id: int) -> list[AdmissionRecord]:
        return self.index["admissions_by_subject"].get(subject_id, [])

    def diagnoses_of(self, hadm_id: int) -> list[DiagnosisRecord]:
        return self.index["diagnoses"].get(hadm_id, [])

    def prescriptions_of(self, hadm_id: int) -> list[PrescriptionRecord]:
        return self.index["prescriptions"].get(hadm_id, [])

    def procedures_of(self, hadm_id: int) -> list[ProcedureRecord]:
        return self.index["procedures"].get(hadm_id, [])

    def __eq__(self, other):
        if not isinstance(other, RawTables):
            return NotImplemented
        return all(list(getattr(self, k)) == list(getattr(other, k)) for k in TABLE_FILES)


def load_tables(data_dir, strict: bool = True) -> RawTables:
    """Parse the five-file bundle in ``data_dir``.

    A missing file raises :class:`SchemaError`; row problems follow
    :func:`parse_table`'s strict/lenient contract.
    """
    parsed = {}
    for kind, filename in TABLE_FILES.items():
        path = os.path.join(data_dir, filename)
        if not os.path.isfile(path):
            raise SchemaError(f"missing table file {path}")
        parsed[kind] = parse_table(path, kind, strict=strict)
    return RawTables(**parsed)


def save_tables(tables: RawTables, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for kind, filename in TABLE_FILES.items():
        path = os.path.join(out_dir, filename)
        write_table(getattr(tables, kind), path, kind)
        paths.append(path)
    return paths


@dataclass(frozen=True)
class Violation:
    table: str
    row: int
    column: str
    value: int

    def __str__(self):
        return f"{self.table}[{self.row}]: {self.column}={self.value} has no parent record"


def validate_referential_integrity(tables: RawTables) -> list[Violation]:
    """List every dangling subject/admission reference (row = 0-based position)."""
    subjects = {p.subject_id for p in tables.patients}
    hadms = {a.hadm_id for a in tables.admissions}
    out = []
    for row, adm in enumerate(tables.admissions):
        if adm.subject_id not in subjects:
            out.append(Violation("admissions", row, "SUBJECT_ID", adm.subject_id))
    for name in ("diagnoses", "prescriptions", "procedures"):
        for row, rec in enumerate(getattr(tables, name)):
            if rec.subject_id not in subjects:
                out.append(Violation(name, row, "SUBJECT_ID", rec.subject_id))
            if rec.hadm_id not in hadms:
                out.append(Violation(name, row, "HADM_ID", rec.hadm_id))
    return out


def is_mental_disease_code(icd9: str) -> bool:
    """True for ICD-9 chapter 5 (Mental Disorders), codes 290-319."""
    prefix = icd9.strip().replace(".", "")[:3]
    if len(prefix) < 3 or not prefix.isdigit():
        return False
    return 290 <= int(prefix) <= 319
