"""Thirty-day mortality prediction for patients with mental-disorder diagnoses.

The pipeline runs from MIMIC-III-shaped CSV tables to cohort extraction,
binary feature encoding, four classifiers written from scratch,
cross-validated ROC-AUC and permutation feature importance.
"""

__version__ = "0.1.0"
