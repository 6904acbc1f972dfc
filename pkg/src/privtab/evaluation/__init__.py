"""TSTR harness: metrics, downstream classifiers, reports, label-swap audit."""

from .downstream import KINDS, ConstantModel, fit_downstream
from .metrics import aucpr, auroc
from .tstr import (
    MetricRow,
    TstrReport,
    label_swap_audit,
    plot_data_csv,
    stratified_split,
    tstr_evaluate,
    validate_report,
)

__all__ = [
    "KINDS",
    "ConstantModel",
    "MetricRow",
    "TstrReport",
    "aucpr",
    "auroc",
    "fit_downstream",
    "label_swap_audit",
    "plot_data_csv",
    "stratified_split",
    "tstr_evaluate",
    "validate_report",
]
