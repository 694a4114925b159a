"""Deterministic MIMIC-III-shaped synthetic tables with planted outcome signal.

Labels are fixed first by an exact death quota; codes on each patient's
index admission are then drawn conditional on the label. Everything else
(demographics, background codes, other admissions) is label-independent,
so an empty signal list yields a null data set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timedelta
from typing import Optional

import numpy as np

from .ehr_tables import (AdmissionRecord, DiagnosisRecord, PatientRecord, PrescriptionRecord,
                         ProcedureRecord, RawTables, save_tables)
from .rng import stream

COHORT_PATIENTS = 13_400
COHORT_MORTALITY = 0.138
COHORT_MULTI_ADMISSION = 3_400 / 13_400

MENTAL_DX = ("29620", "29630", "29570", "2920", "29181", "30000", "30001", "3004",
             "30390", "30500", "3051", "311", "2900", "2949", "29410", "3099", "3090")
OTHER_DX = ("4019", "4280", "42731", "5849", "25000", "2724", "51881", "5990",
            "2851", "41401", "486", "0389", "V1582", "E8497", "V4581")

DEFAULT_DISTRIBUTIONS = {
    "gender": (("M", 0.55), ("F", 0.45)),
    "admission_type": (("EMERGENCY", 0.82), ("ELECTIVE", 0.12), ("URGENT", 0.06)),
    "insurance": (("Medicare", 0.55), ("Private", 0.27), ("Medicaid", 0.12),
                  ("Government", 0.04), ("Self Pay", 0.02)),
    "language": (("ENGL", 0.80), ("SPAN", 0.05), ("RUSS", 0.03), ("PTUN", 0.03),
                 ("CANT", 0.02), ("HAIT", 0.02), ("PORT", 0.02), ("CAPE", 0.01),
                 ("MAND", 0.01), ("ITAL", 0.01)),
    "religion": (("CATHOLIC", 0.36), ("NOT SPECIFIED", 0.16), ("PROTESTANT QUAKER", 0.14),
                 ("UNOBTAINABLE", 0.10), ("JEWISH", 0.09), ("OTHER", 0.05),
                 ("EPISCOPALIAN", 0.02), ("GREEK ORTHODOX", 0.02), ("CHRISTIAN SCIENTIST", 0.02),
                 ("BUDDHIST", 0.01), ("MUSLIM", 0.01), ("UNITARIAN-UNIVERSALIST", 0.01)),
    "marital_status": (("MARRIED", 0.40), ("SINGLE", 0.30), ("WIDOWED", 0.15),
                       ("DIVORCED", 0.12), ("SEPARATED", 0.02), ("LIFE PARTNER", 0.01)),
    "ethnicity": (("WHITE", 0.72), ("BLACK/AFRICAN AMERICAN", 0.10), ("UNKNOWN/NOT SPECIFIED", 0.06),
                  ("HISPANIC OR LATINO", 0.04), ("OTHER", 0.03), ("ASIAN", 0.02),
                  ("UNABLE TO OBTAIN", 0.01), ("PATIENT DECLINED TO ANSWER", 0.01),
                  ("WHITE - RUSSIAN", 0.01)),
}
DEFAULT_MISSING_RATES = {"language": 0.30, "religion": 0.01, "marital_status": 0.10}

# (kind, code, odds multiplier); the default for ``generate``.
DEFAULT_SIGNAL = (
    ("drug", "004489", 8.0),
    ("drug", "016599", 6.0),
    ("drug", "008209", 6.0),
    ("drug", "027462", 5.0),
    ("drug", "004380", 5.0),
    ("drug", "002585", 4.0),
    ("drug", "061716", 4.0),
    ("drug", "043952", 4.0),
    ("proc", "9671", 6.0),
    ("proc", "9604", 5.0),
)
# Names for the default signal codes, usable as a --code-names lookup.
DEFAULT_SIGNAL_NAMES = {
    "004489": "Morphine Sulfate", "016599": "Scopolamine Patch", "008209": "Pantoprazole",
    "027462": "Oxycodone-Acetaminophen", "004380": "Docusate Sodium", "002585": "Heparin",
    "061716": "Vasopressin", "043952": "Fentanyl Citrate",
    "9671": "Continuous invasive mechanical ventilation for less than 96 consecutive hours",
    "9604": "Insertion of endotracheal tube",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = COHORT_PATIENTS
    mortality_rate: float = COHORT_MORTALITY
    multi_admission_fraction: float = COHORT_MULTI_ADMISSION
    max_admissions: int = 42
    late_death_fraction: float = 0.05
    n_drug_codes: int = 600
    n_procedure_codes: int = 200
    mean_drugs: float = 12.0
    mean_procedures: float = 3.0
    gsn_null_rate: float = 0.02
    signal: tuple = DEFAULT_SIGNAL
    signal_base_rate: float = 0.25
    distributions: dict = field(default_factory=lambda: dict(DEFAULT_DISTRIBUTIONS))
    missing_rates: dict = field(default_factory=lambda: dict(DEFAULT_MISSING_RATES))
    seed: int = 42

    @property
    def n_deaths(self) -> int:
        return int(math.floor(self.n_patients * self.mortality_rate + 0.5))

    def validate(self) -> "SynthConfig":
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(key, msg)

        need(self.n_patients >= 1, "n_patients", "must be >= 1")
        need(0 < self.mortality_rate < 1, "mortality_rate", "must lie strictly between 0 and 1")
        need(0 <= self.multi_admission_fraction <= 1, "multi_admission_fraction",
             "must lie in [0, 1]")
        need(self.max_admissions >= 2 or self.multi_admission_fraction == 0, "max_admissions",
             "must be >= 2 when multi-admission patients are requested")
        need(0 <= self.late_death_fraction <= 1, "late_death_fraction", "must lie in [0, 1]")
        need(self.n_drug_codes >= 1, "n_drug_codes", "must be >= 1")
        need(self.n_procedure_codes >= 1, "n_procedure_codes", "must be >= 1")
        need(self.mean_drugs >= 1, "mean_drugs", "must be >= 1")
        need(self.mean_procedures >= 1, "mean_procedures", "must be >= 1")
        need(0 <= self.gsn_null_rate < 1, "gsn_null_rate", "must lie in [0, 1)")
        need(0 < self.signal_base_rate < 1, "signal_base_rate", "must lie strictly between 0 and 1")
        need(self.n_deaths <= self.n_patients, "mortality_rate", "death quota exceeds population")
        seen = set()
        for kind, code, mult in self.signal:
            need(kind in ("drug", "proc"), "signal", f"unknown code kind {kind!r}")
            need(mult > 0, "signal", f"odds multiplier for {code} must be > 0")
            need((kind, code) not in seen, "signal", f"duplicate code {kind}:{code}")
            seen.add((kind, code))
        for feature, dist in self.distributions.items():
            need(feature in DEFAULT_DISTRIBUTIONS, feature, "unknown distribution")
            weights = [w for _, w in dist]
            need(len(dist) > 0 and min(weights) >= 0 and sum(weights) > 0, feature,
                 "weights must be non-negative with a positive sum")
        for feature, rate in self.missing_rates.items():
            need(feature in DEFAULT_DISTRIBUTIONS, f"{feature}_missing_rate", "unknown feature")
            need(0 <= rate < 1, f"{feature}_missing_rate", "must lie in [0, 1)")
        return self


# -- config file -------------------------------------------------------------


def _parse_distribution(key, text):
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        cat, sep, weight = part.rpartition(":")
        if not sep:
            raise ConfigError(key, f"expected CATEGORY:WEIGHT, got {part!r}")
        try:
            out.append((cat.strip(), float(weight)))
        except ValueError:
            raise ConfigError(key, f"bad weight {weight!r}") from None
    return tuple(out)


def _parse_signal(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 3:
            raise ConfigError("signal", f"expected KIND:CODE:MULTIPLIER, got {part!r}")
        try:
            out.append((bits[0].strip(), bits[1].strip(), float(bits[2])))
        except ValueError:
            raise ConfigError("signal", f"bad multiplier in {part!r}") from None
    return tuple(out)


def parse_config(text: str, base: Optional[SynthConfig] = None) -> SynthConfig:
    """Read flat ``key = value`` lines (``#`` starts a comment) over ``base``.

    Scalar keys are the :class:`SynthConfig` field names. Distributions use
    ``insurance = Medicare:0.5; Private:0.3`` and missing rates
    ``religion_missing_rate = 0.1``; ``signal = drug:004489:8, proc:9671:6``
    (empty value for no signal).
    """
    cfg = base or SynthConfig()
    types = {f.name: f.type for f in fields(SynthConfig)}
    updates = {}
    dists = dict(cfg.distributions)
    missing = dict(cfg.missing_rates)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(key or f"line {lineno}", "expected key = value")
        if key == "signal":
            updates["signal"] = _parse_signal(value)
        elif key in DEFAULT_DISTRIBUTIONS:
            dists[key] = _parse_distribution(key, value)
        elif key.endswith("_missing_rate"):
            try:
                missing[key[: -len("_missing_rate")]] = float(value)
            except ValueError:
                raise ConfigError(key, f"not a number: {value!r}") from None
        elif key in types and key not in ("distributions", "missing_rates"):
            kind = types[key]
            try:
                updates[key] = int(value) if kind in ("int", int) else float(value)
            except ValueError:
                raise ConfigError(key, f"not a number: {value!r}") from None
        else:
            raise ConfigError(key, "unknown configuration key")
    return replace(cfg, distributions=dists, missing_rates=missing, **updates).validate()


def config_to_text(cfg: SynthConfig) -> str:
    lines = []
    for f in fields(SynthConfig):
        if f.name in ("signal", "distributions", "missing_rates"):
            continue
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    lines.append("signal = " + ", ".join(f"{k}:{c}:{m:g}" for k, c, m in cfg.signal))
    for feature, dist in cfg.distributions.items():
        lines.append(f"{feature} = " + "; ".join(f"{c}:{w:g}" for c, w in dist))
    for feature, rate in cfg.missing_rates.items():
        lines.append(f"{feature}_missing_rate = {rate:g}")
    return "\n".join(lines) + "\n"


# -- generation --------------------------------------------------------------


def _truncated_geometric(rng, mean, upper, size=None):
    """Geometric on {1, 2, ...} with the given mean, capped at ``upper``."""
    draws = rng.geometric(1.0 / mean, size=size)
    return np.minimum(draws, upper)


def _vocabulary(rng, n, low, high, width, reserved):
    pool = np.setdiff1d(np.arange(low, high), np.array(sorted(int(r) for r in reserved), dtype=int))
    picks = np.sort(rng.choice(pool, size=n, replace=False))
    return [f"{int(v):0{width}d}" for v in picks]


def _zipf_weights(n):
    w = 1.0 / np.arange(1, n + 1)
    return w / w.sum()


def _categorical(rng, dist, size):
    cats = [c for c, _ in dist]
    p = np.array([w for _, w in dist], dtype=np.float64)
    return [cats[i] for i in rng.choice(len(cats), size=size, p=p / p.sum())]


def _signal_probability(base, multiplier):
    """Presence probability among deaths giving odds ratio ``multiplier`` vs ``base``."""
    return multiplier * base / (1.0 - base + multiplier * base)


def generate(config: SynthConfig = SynthConfig()) -> RawTables:
    config.validate()
    n = config.n_patients
    seed = config.seed

    vocab_rng = stream(seed, "vocabulary")
    signal_drugs = [c for k, c, _ in config.signal if k == "drug"]
    signal_procs = [c for k, c, _ in config.signal if k == "proc"]
    reserved_drugs = {c for c in signal_drugs if c.isdigit()}
    reserved_procs = {c for c in signal_procs if c.isdigit()}
    drug_vocab = _vocabulary(vocab_rng, config.n_drug_codes, 1, 100_000, 6, reserved_drugs)
    proc_vocab = _vocabulary(vocab_rng, config.n_procedure_codes, 1, 10_000, 4, reserved_procs)
    drug_w = _zipf_weights(len(drug_vocab))
    proc_w = _zipf_weights(len(proc_vocab))
    drug_rng_perm = vocab_rng.permutation(len(drug_vocab))
    proc_rng_perm = vocab_rng.permutation(len(proc_vocab))
    drug_w, proc_w = drug_w[drug_rng_perm], proc_w[proc_rng_perm]

    label_rng = stream(seed, "labels")
    died = np.zeros(n, dtype=bool)
    died[label_rng.permutation(n)[: config.n_deaths]] = True
    late = (~died) & (label_rng.random(n) < config.late_death_fraction)

    adm_rng = stream(seed, "admissions")
    n_multi = int(math.floor(n * config.multi_admission_fraction + 0.5))
    counts = np.ones(n, dtype=int)
    if n_multi and config.max_admissions >= 2:
        multi = adm_rng.permutation(n)[:n_multi]
        counts[multi] = 1 + _truncated_geometric(adm_rng, 2.0, config.max_admissions - 1, n_multi)

    demo_rng = stream(seed, "demographics")
    demo = {}
    for feature in ("gender", "admission_type", "insurance", "language", "religion",
                    "marital_status", "ethnicity"):
        values = _categorical(demo_rng, config.distributions[feature], n)
        rate = config.missing_rates.get(feature, 0.0)
        if rate > 0:
            gone = demo_rng.random(n) < rate
            values = [None if g else v for v, g in zip(values, gone)]
        demo[feature] = values

    time_rng = stream(seed, "timeline")
    code_rng = stream(seed, "codes")
    signal_rng = stream(seed, "signal")

    tables = RawTables()
    hadm_id = 100_000
    for p in range(n):
        subject_id = p + 1
        n_adm = int(counts[p])
        if died[p] or late[p]:
            index_pos = n_adm - 1
        else:
            index_pos = int(time_rng.integers(0, n_adm))
        age_years = int(time_rng.integers(18, 90))
        first = datetime(2101, 1, 1) + timedelta(days=int(time_rng.integers(0, 365 * 80)),
                                                 seconds=int(time_rng.integers(0, 86_400)))
        dob = datetime(first.year - age_years, 1, 1) + timedelta(days=int(time_rng.integers(0, 365)))
        dob = min(dob, first)
        admit = first
        dod = None
        for a in range(n_adm):
            hadm_id += 1
            stay = timedelta(hours=int(time_rng.integers(24, 24 * 30)))
            discharge = admit + stay
            # admission_type varies per stay in real data; here it is per patient
            tables.admissions.append(AdmissionRecord(
                hadm_id=hadm_id, subject_id=subject_id, admit_time=admit, discharge_time=discharge,
                admission_type=demo["admission_type"][p], insurance=demo["insurance"][p],
                language=demo["language"][p], religion=demo["religion"][p],
                marital_status=demo["marital_status"][p], ethnicity=demo["ethnicity"][p]))

            is_index = a == index_pos
            n_other = int(code_rng.integers(1, 6))
            dx = list(code_rng.choice(OTHER_DX, size=n_other, replace=False))
            if is_index or (a > index_pos and code_rng.random() < 0.5):
                n_mental = int(code_rng.integers(1, 3))
                dx = list(code_rng.choice(MENTAL_DX, size=n_mental, replace=False)) + dx
                code_rng.shuffle(dx)
            for seq, code in enumerate(dx, 1):
                tables.diagnoses.append(DiagnosisRecord(subject_id, hadm_id, str(code), seq))

            k_drugs = int(_truncated_geometric(code_rng, config.mean_drugs, len(drug_vocab)))
            drugs = [drug_vocab[i] for i in
                     code_rng.choice(len(drug_vocab), size=k_drugs, replace=False, p=drug_w)]
            k_procs = int(_truncated_geometric(code_rng, config.mean_procedures, len(proc_vocab)))
            procs = [proc_vocab[i] for i in
                     code_rng.choice(len(proc_vocab), size=k_procs, replace=False, p=proc_w)]
            if is_index:
                for kind, code, mult in config.signal:
                    prob = (_signal_probability(config.signal_base_rate, mult) if died[p]
                            else config.signal_base_rate)
                    if signal_rng.random() < prob:
                        (drugs if kind == "drug" else procs).append(code)
            for gsn in drugs:
                tables.prescriptions.append(
                    PrescriptionRecord(subject_id, hadm_id, gsn, f"DRUG {gsn}"))
            if config.gsn_null_rate > 0 and code_rng.random() < config.gsn_null_rate * k_drugs:
                tables.prescriptions.append(
                    PrescriptionRecord(subject_id, hadm_id, None, "UNCODED PRODUCT"))
            for code in procs:
                tables.procedures.append(ProcedureRecord(subject_id, hadm_id, code))

            if is_index and died[p]:
                dod = discharge + timedelta(days=int(time_rng.integers(0, 31)))
            elif is_index and late[p]:
                dod = discharge + timedelta(days=int(time_rng.integers(31, 366)))
            admit = discharge + timedelta(days=int(time_rng.integers(10, 400)),
                                          hours=int(time_rng.integers(0, 24)))
        tables.patients.append(PatientRecord(subject_id, demo["gender"][p], dob, dod))
    return tables


def write_tables(tables: RawTables, out_dir) -> list[str]:
    """Write the five-CSV bundle; returns the file paths."""
    return save_tables(tables, out_dir)
