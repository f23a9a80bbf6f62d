"""Data-bias auditing for tabular datasets.

Measures minority, missing-data, informativeness and selection bias,
applies pre-processing mitigations and records findings in a sidecar that
travels with the dataset.
"""

__version__ = "0.1.0"

from .completeness import completeness, group_completeness, missingness_disparity, protected_group_completeness
from .dataset import MISSING, ColumnType, Dataset, GroupKey, load_csv, write_csv
from .informativeness import encode, importance, train_logistic
from .metadata import BiasMetadata, read_sidecar, verify, write_sidecar
from .minority import coverage, density, fairness, outcome_parity
from .mitigation import ImputationSpec, Strategy, holdout, impute, kfold, repair_order, reweigh
from .pipeline import (
    Action,
    BiasFinding,
    BiasType,
    MitigationPlan,
    Severity,
    audit,
    identify,
    measure,
    mitigate,
)
from .profile import AuditProfile
from .report import REPORT_SCHEMA, build_report, emit_report
from .selection import SplitSpec, chi_square_homogeneity, compare_splits, ks_two_sample
from .synth import SynthSpec, generate

__all__ = [
    "MISSING",
    "Action",
    "AuditProfile",
    "BiasFinding",
    "BiasMetadata",
    "BiasType",
    "ColumnType",
    "Dataset",
    "GroupKey",
    "ImputationSpec",
    "MitigationPlan",
    "REPORT_SCHEMA",
    "Severity",
    "SplitSpec",
    "Strategy",
    "SynthSpec",
    "audit",
    "build_report",
    "chi_square_homogeneity",
    "compare_splits",
    "completeness",
    "coverage",
    "density",
    "emit_report",
    "encode",
    "fairness",
    "generate",
    "group_completeness",
    "holdout",
    "identify",
    "importance",
    "impute",
    "kfold",
    "ks_two_sample",
    "load_csv",
    "measure",
    "missingness_disparity",
    "mitigate",
    "outcome_parity",
    "protected_group_completeness",
    "read_sidecar",
    "repair_order",
    "reweigh",
    "train_logistic",
    "verify",
    "write_csv",
    "write_sidecar",
]
