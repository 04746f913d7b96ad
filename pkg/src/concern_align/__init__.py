"""Concern-level alignment metrics for comparing AI reviews with official peer review."""

from .concerns import (
    AcTreatment,
    AgenticConcern,
    AgenticReview,
    OfficialConcern,
    PaperRecord,
    PdfState,
    SchemaError,
    Severity,
    Verdict,
    parse_agentic_sheet,
    parse_official_sheet,
)
from .graph import (
    InclusionPolicy,
    JudgmentAlignment,
    MatchEdge,
    MatchGraph,
    MatchType,
    SeverityAlignment,
    SeverityPolicy,
    build_graph,
    lint_graph,
)
from .metrics import LadderConfig, VerdictSource
from .overrides import OverrideEntry, OverrideKind, apply_overrides, diff_graphs, generate_worksheet
from .stats import bootstrap_ci, cohen_kappa, icc_2_1
from .verdict import GateCategory, default_reject_fold, gate_verdict

__all__ = [
    "AcTreatment", "AgenticConcern", "AgenticReview", "OfficialConcern", "PaperRecord", "PdfState",
    "SchemaError", "Severity", "Verdict", "parse_agentic_sheet", "parse_official_sheet",
    "InclusionPolicy", "JudgmentAlignment", "MatchEdge", "MatchGraph", "MatchType", "SeverityAlignment",
    "SeverityPolicy", "build_graph", "lint_graph", "LadderConfig", "VerdictSource",
    "OverrideEntry", "OverrideKind", "apply_overrides", "diff_graphs", "generate_worksheet",
    "bootstrap_ci", "cohen_kappa", "icc_2_1", "GateCategory", "default_reject_fold", "gate_verdict",
]
