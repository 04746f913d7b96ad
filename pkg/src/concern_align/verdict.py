"""Verdicts the engine can compute itself: gate rules and the default-REJECT fold."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from .concerns import (
    AgenticConcern,
    AgenticReview,
    SchemaError,
    Severity,
    Verdict,
    _bool,
    _check_fields,
    _enum,
    _load,
    _text,
)
from .metrics import VerdictSource


class GateCategory(str, Enum):
    # G3 is not part of the published gate list
    G1_CLAIM_EVIDENCE = "G1_claim_evidence"
    G2_BASELINE_FAIRNESS = "G2_baseline_fairness"
    G4_VALIDITY = "G4_validity"
    G5_NOVELTY = "G5_novelty"
    NONE = "none"

    @property
    def fundamental(self) -> bool:
        return self is not GateCategory.NONE


class InferredValue(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class InferredVerdict:
    value: InferredValue
    source: VerdictSource

    def as_verdict(self) -> Verdict | None:
        if self.value is InferredValue.AMBIGUOUS:
            return None
        return Verdict(self.value.value)


@dataclass(frozen=True)
class GateClassifiedReview:
    concerns: tuple[tuple[AgenticConcern, GateCategory], ...]
    positive_acceptance_signal: bool


def gate_verdict(r: GateClassifiedReview) -> InferredVerdict:
    """Reject on any fatal concern or on two fatal/major concerns hitting a
    fundamental gate; accept only when no fatal/major concern hits a gate and
    the review carries a positive acceptance signal."""
    if any(c.severity is Severity.FATAL for c, _ in r.concerns):
        value = InferredValue.REJECT
    else:
        gated = sum(1 for c, gate in r.concerns if c.severity.is_high and gate.fundamental)
        if gated >= 2:
            value = InferredValue.REJECT
        elif gated == 0 and r.positive_acceptance_signal:
            value = InferredValue.ACCEPT
        else:
            value = InferredValue.AMBIGUOUS
    return InferredVerdict(value, VerdictSource.GATE)


def default_reject_fold(v: InferredVerdict) -> InferredVerdict:
    if v.value is InferredValue.AMBIGUOUS:
        return InferredVerdict(InferredValue.REJECT, VerdictSource.GATE_DEFAULT_REJECT)
    return v


@dataclass(frozen=True)
class GateFile:
    gates: dict[str, GateCategory]
    positive_acceptance_signal: bool


def parse_gate_file(data: bytes | str | dict, *, source: str | None = None) -> GateFile:
    """``{"positive_acceptance_signal": bool, "gates": [{"agentic_id", "gate_code"}]}``."""
    raw = _load(data, source)
    _check_fields(raw, ("positive_acceptance_signal", "gates"), (), "gate file", source)
    if not isinstance(raw["gates"], list):
        raise SchemaError("gates must be a list", source=source)
    gates: dict[str, GateCategory] = {}
    for i, item in enumerate(raw["gates"]):
        where = f"gates[{i}]"
        _check_fields(item, ("agentic_id", "gate_code"), (), where, source)
        aid = _text(item["agentic_id"], "agentic_id", where, source)
        if aid in gates:
            raise SchemaError(f"{where}: {aid} classified twice", source=source)
        gates[aid] = _enum(GateCategory, item["gate_code"], "gate_code", where, source)
    return GateFile(
        gates=gates,
        positive_acceptance_signal=_bool(
            raw["positive_acceptance_signal"], "positive_acceptance_signal", "gate file", source
        ),
    )


def classify_review(review: AgenticReview, gate_file: GateFile) -> GateClassifiedReview:
    """Pair each concern with its gate; unclassified concerns get ``none``."""
    ids = {c.id for c in review.concerns}
    unknown = sorted(set(gate_file.gates) - ids)
    if unknown:
        raise SchemaError(f"gate file classifies unknown concern(s) {', '.join(unknown)}")
    return GateClassifiedReview(
        concerns=tuple((c, gate_file.gates.get(c.id, GateCategory.NONE)) for c in review.concerns),
        positive_acceptance_signal=gate_file.positive_acceptance_signal,
    )


def predict_verdict(
    review: AgenticReview,
    source: VerdictSource,
    gate_file: GateFile | None = None,
) -> InferredVerdict | None:
    """Predicted verdict under the configured source; None when unavailable.

    A missing native verdict stays missing; it is never filled in from gates.
    """
    if source is VerdictSource.NATIVE:
        if review.native_verdict is None:
            return None
        return InferredVerdict(InferredValue(review.native_verdict.value), VerdictSource.NATIVE)
    if gate_file is None:
        return None
    v = gate_verdict(classify_review(review, gate_file))
    return default_reject_fold(v) if source is VerdictSource.GATE_DEFAULT_REJECT else v

