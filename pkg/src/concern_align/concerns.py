"""Concern, paper and corpus records, with canonical JSON parsing.

Official sheets describe what the human reviewers and the area chair raised
about one paper; agentic sheets describe what one AI review run raised.  Both
are produced upstream and only validated here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable


class SchemaError(ValueError):
    """A canonical record is malformed or violates a record invariant."""

    def __init__(self, message: str, *, source: str | None = None):
        self.source = source
        super().__init__(f"{source}: {message}" if source else message)


class Severity(str, Enum):
    FATAL = "fatal"
    MAJOR = "major"
    MODERATE = "moderate"
    MINOR = "minor"
    UNKNOWN = "unknown"

    @property
    def rank(self) -> int | None:
        return _SEVERITY_RANK.get(self)

    @property
    def is_high(self) -> bool:
        """fatal or major; these are the levels that can block acceptance."""
        return self in (Severity.FATAL, Severity.MAJOR)


_SEVERITY_RANK = {
    Severity.FATAL: 3,
    Severity.MAJOR: 2,
    Severity.MODERATE: 1,
    Severity.MINOR: 0,
}

ORDERED_SEVERITIES = (Severity.FATAL, Severity.MAJOR, Severity.MODERATE, Severity.MINOR)


def severity_gap(a: Severity, b: Severity) -> int | None:
    """Absolute rank distance between two levels; None if either is unknown."""
    if a.rank is None or b.rank is None:
        return None
    return abs(a.rank - b.rank)


class AcTreatment(str, Enum):
    DECISIVE_BLOCKER = "decisive_blocker"
    UNRESOLVED = "unresolved"
    RESOLVED = "resolved"
    ACCEPTED_LIMITATION = "accepted_limitation"
    DISMISSED = "dismissed"
    REFRAMED_FEATURE = "reframed_feature"
    NOT_MENTIONED = "not_mentioned"


class PdfState(str, Enum):
    """Whether a resolved concern's fix is visible in the reviewed PDF."""

    ADDRESSED = "true"
    NOT_ADDRESSED = "false"
    NOT_APPLICABLE = "not_applicable"

    def to_json(self) -> bool | str:
        if self is PdfState.ADDRESSED:
            return True
        if self is PdfState.NOT_ADDRESSED:
            return False
        return self.value


class Addressability(str, Enum):
    UNRESOLVED = "unresolved"
    ADDRESSABLE = "addressable"
    UNKNOWN = "unknown"


class Verdict(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"


_OFFICIAL_ID = re.compile(r"^O\d+$")
_AGENTIC_ID = re.compile(r"^A\d+$")


def concern_sort_key(concern_id: str) -> tuple[str, int, str]:
    """Sort O2 before O10; ids that do not follow the pattern sort lexically."""
    m = re.match(r"^([A-Za-z]+)(\d+)$", concern_id)
    if m:
        return (m.group(1), int(m.group(2)), concern_id)
    return (concern_id, -1, concern_id)


@dataclass(frozen=True)
class CriticalReference:
    citation: str
    role: str


@dataclass(frozen=True)
class OfficialConcern:
    id: str
    statement: str
    severity: Severity
    treatment: AcTreatment
    decisive: bool
    addressed_in_pdf: PdfState = PdfState.NOT_APPLICABLE
    evidence_quotes: tuple[str, ...] = ()
    provenance: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    critical_references: tuple[CriticalReference, ...] = ()

    @property
    def rebuttal_only(self) -> bool:
        """Resolved by the AC, but the fix never reached the reviewed PDF."""
        return (
            self.treatment is AcTreatment.RESOLVED
            and self.addressed_in_pdf is PdfState.NOT_ADDRESSED
        )

    @property
    def pdf_fixed(self) -> bool:
        return (
            self.treatment is AcTreatment.RESOLVED
            and self.addressed_in_pdf is PdfState.ADDRESSED
        )


@dataclass(frozen=True)
class AgenticConcern:
    id: str
    statement: str
    severity: Severity
    decisive: bool
    addressability: Addressability = Addressability.UNKNOWN
    mechanism: str | None = None
    origin: str | None = None
    source_detail: str | None = None


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    official_verdict: Verdict
    venue: str
    pdf_is_revised: bool
    official_concerns: tuple[OfficialConcern, ...]

    def concern(self, concern_id: str) -> OfficialConcern:
        for c in self.official_concerns:
            if c.id == concern_id:
                return c
        raise KeyError(concern_id)


@dataclass(frozen=True)
class AgenticReview:
    """One parsed agentic sheet: a single system run on a single paper."""

    paper_id: str
    system_id: str
    run_id: str
    concerns: tuple[AgenticConcern, ...]
    native_verdict: Verdict | None = None


@dataclass(frozen=True)
class SystemEntry:
    system_id: str
    model_id: str
    runs: tuple[str, ...]


@dataclass(frozen=True)
class GraphRef:
    """Files that together make up one (paper, system, run) graph."""

    graph: Path
    agentic_sheet: Path
    gate: Path | None = None


@dataclass(frozen=True)
class CorpusManifest:
    root: Path
    papers: dict[str, Path]
    systems: tuple[SystemEntry, ...]
    graph_index: dict[tuple[str, str, str], GraphRef] = field(default_factory=dict)

    def keys_for(self, system_id: str) -> list[tuple[str, str, str]]:
        return sorted(k for k in self.graph_index if k[1] == system_id)


# -- parsing helpers ------------------------------------------------------------


def _load(data: bytes | str | dict | list, source: str | None) -> Any:
    if isinstance(data, (dict, list)):
        return data
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"not UTF-8: {exc}", source=source) from None
    try:
        return json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}", source=source) from None


def _check_fields(
    obj: Any,
    required: Iterable[str],
    optional: Iterable[str],
    where: str,
    source: str | None,
) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object", source=source)
    required = tuple(required)
    allowed = set(required) | set(optional)
    missing = [k for k in required if k not in obj]
    if missing:
        raise SchemaError(f"{where}: missing required field(s) {', '.join(missing)}", source=source)
    extra = sorted(set(obj) - allowed)
    if extra:
        raise SchemaError(f"{where}: unknown field(s) {', '.join(extra)}", source=source)


def _enum(cls: type[Enum], token: Any, what: str, where: str, source: str | None):
    try:
        return cls(token)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise SchemaError(f"{where}: unknown {what} {token!r} (expected one of {choices})", source=source) from None


def _text(value: Any, what: str, where: str, source: str | None, *, nonempty: bool = True) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{where}: {what} must be a string", source=source)
    if nonempty and not value.strip():
        raise SchemaError(f"{where}: {what} must be non-empty", source=source)
    return value


def _opt_text(value: Any, what: str, where: str, source: str | None) -> str | None:
    if value is None:
        return None
    return _text(value, what, where, source, nonempty=False)


def _bool(value: Any, what: str, where: str, source: str | None) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(f"{where}: {what} must be a boolean", source=source)
    return value


def _str_list(value: Any, what: str, where: str, source: str | None) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"{where}: {what} must be a list of strings", source=source)
    return tuple(value)


def _pdf_state(value: Any, where: str, source: str | None) -> PdfState:
    if value is True:
        return PdfState.ADDRESSED
    if value is False:
        return PdfState.NOT_ADDRESSED
    if value == PdfState.NOT_APPLICABLE.value:
        return PdfState.NOT_APPLICABLE
    raise SchemaError(
        f"{where}: addressed_in_pdf must be true, false or 'not_applicable' (got {value!r})",
        source=source,
    )


# -- official sheets ------------------------------------------------------------

_OFFICIAL_SHEET_FIELDS = ("paper_id", "official_verdict", "venue", "pdf_is_revised", "concerns")
_OFFICIAL_REQUIRED = ("id", "statement", "severity", "ac_treatment", "decisive", "addressed_in_pdf")
_OFFICIAL_OPTIONAL = ("evidence_quotes", "provenance", "tags", "critical_references")


def _official_concern(raw: Any, index: int, source: str | None) -> OfficialConcern:
    where = f"concerns[{index}]"
    _check_fields(raw, _OFFICIAL_REQUIRED, _OFFICIAL_OPTIONAL, where, source)
    cid = _text(raw["id"], "id", where, source)
    if not _OFFICIAL_ID.match(cid):
        raise SchemaError(f"{where}: official concern id {cid!r} must match O<digits>", source=source)
    where = f"concern {cid}"
    severity = _enum(Severity, raw["severity"], "severity", where, source)
    if severity is Severity.UNKNOWN:
        raise SchemaError(f"{where}: official concerns cannot carry severity 'unknown'", source=source)
    treatment = _enum(AcTreatment, raw["ac_treatment"], "ac_treatment", where, source)
    decisive = _bool(raw["decisive"], "decisive", where, source)
    if decisive != (treatment is AcTreatment.DECISIVE_BLOCKER):
        raise SchemaError(
            f"{where}: decisive={str(decisive).lower()} does not agree with ac_treatment={treatment.value}",
            source=source,
        )
    pdf = _pdf_state(raw["addressed_in_pdf"], where, source)
    if treatment is AcTreatment.RESOLVED and pdf is PdfState.NOT_APPLICABLE:
        raise SchemaError(f"{where}: resolved concern needs addressed_in_pdf true or false", source=source)
    if treatment is not AcTreatment.RESOLVED and pdf is not PdfState.NOT_APPLICABLE:
        raise SchemaError(
            f"{where}: addressed_in_pdf is only recorded for resolved concerns "
            f"(ac_treatment={treatment.value})",
            source=source,
        )
    refs = []
    for j, ref in enumerate(raw.get("critical_references", [])):
        rwhere = f"{where}.critical_references[{j}]"
        _check_fields(ref, ("citation", "role"), (), rwhere, source)
        refs.append(
            CriticalReference(
                citation=_text(ref["citation"], "citation", rwhere, source),
                role=_text(ref["role"], "role", rwhere, source),
            )
        )
    return OfficialConcern(
        id=cid,
        statement=_text(raw["statement"], "statement", where, source),
        severity=severity,
        treatment=treatment,
        decisive=decisive,
        addressed_in_pdf=pdf,
        evidence_quotes=_str_list(raw.get("evidence_quotes", []), "evidence_quotes", where, source),
        provenance=_str_list(raw.get("provenance", []), "provenance", where, source),
        tags=_str_list(raw.get("tags", []), "tags", where, source),
        critical_references=tuple(refs),
    )


def parse_official_sheet(data: bytes | str | dict, *, source: str | None = None) -> PaperRecord:
    raw = _load(data, source)
    _check_fields(raw, _OFFICIAL_SHEET_FIELDS, (), "sheet", source)
    paper_id = _text(raw["paper_id"], "paper_id", "sheet", source)
    verdict = _enum(Verdict, raw["official_verdict"], "official_verdict", "sheet", source)
    if not isinstance(raw["concerns"], list):
        raise SchemaError("sheet: concerns must be a list", source=source)
    concerns = tuple(_official_concern(c, i, source) for i, c in enumerate(raw["concerns"]))
    seen: set[str] = set()
    for c in concerns:
        if c.id in seen:
            raise SchemaError(f"duplicate concern id {c.id}", source=source)
        seen.add(c.id)
    if verdict is Verdict.ACCEPT:
        blockers = [c.id for c in concerns if c.treatment is AcTreatment.DECISIVE_BLOCKER]
        if blockers:
            raise SchemaError(
                f"accepted paper carries decisive blocker(s) {', '.join(blockers)}",
                source=source,
            )
    return PaperRecord(
        paper_id=paper_id,
        official_verdict=verdict,
        venue=_text(raw["venue"], "venue", "sheet", source, nonempty=False),
        pdf_is_revised=_bool(raw["pdf_is_revised"], "pdf_is_revised", "sheet", source),
        official_concerns=concerns,
    )


def official_sheet_to_dict(paper: PaperRecord) -> dict:
    return {
        "paper_id": paper.paper_id,
        "official_verdict": paper.official_verdict.value,
        "venue": paper.venue,
        "pdf_is_revised": paper.pdf_is_revised,
        "concerns": [
            {
                "id": c.id,
                "statement": c.statement,
                "evidence_quotes": list(c.evidence_quotes),
                "severity": c.severity.value,
                "ac_treatment": c.treatment.value,
                "decisive": c.decisive,
                "addressed_in_pdf": c.addressed_in_pdf.to_json(),
                "provenance": list(c.provenance),
                "tags": list(c.tags),
                "critical_references": [
                    {"citation": r.citation, "role": r.role} for r in c.critical_references
                ],
            }
            for c in paper.official_concerns
        ],
    }


# -- agentic sheets -------------------------------------------------------------

_AGENTIC_SHEET_FIELDS = ("paper_id", "system_id", "run_id", "concerns")
_AGENTIC_REQUIRED = ("id", "statement", "severity", "decisive")
_AGENTIC_OPTIONAL = ("addressability", "mechanism", "origin", "source_detail")


def _agentic_concern(raw: Any, index: int, source: str | None) -> AgenticConcern:
    where = f"concerns[{index}]"
    _check_fields(raw, _AGENTIC_REQUIRED, _AGENTIC_OPTIONAL, where, source)
    cid = _text(raw["id"], "id", where, source)
    if not _AGENTIC_ID.match(cid):
        raise SchemaError(f"{where}: agentic concern id {cid!r} must match A<digits>", source=source)
    where = f"concern {cid}"
    return AgenticConcern(
        id=cid,
        statement=_text(raw["statement"], "statement", where, source),
        severity=_enum(Severity, raw["severity"], "severity", where, source),
        decisive=_bool(raw["decisive"], "decisive", where, source),
        addressability=_enum(
            Addressability, raw.get("addressability", "unknown"), "addressability", where, source
        ),
        mechanism=_opt_text(raw.get("mechanism"), "mechanism", where, source),
        origin=_opt_text(raw.get("origin"), "origin", where, source),
        source_detail=_opt_text(raw.get("source_detail"), "source_detail", where, source),
    )


def parse_agentic_sheet(data: bytes | str | dict, *, source: str | None = None) -> AgenticReview:
    raw = _load(data, source)
    _check_fields(raw, _AGENTIC_SHEET_FIELDS, ("native_verdict",), "sheet", source)
    native = raw.get("native_verdict")
    if native is not None:
        native = _enum(Verdict, native, "native_verdict", "sheet", source)
    if not isinstance(raw["concerns"], list):
        raise SchemaError("sheet: concerns must be a list", source=source)
    concerns = tuple(_agentic_concern(c, i, source) for i, c in enumerate(raw["concerns"]))
    seen: set[str] = set()
    for c in concerns:
        if c.id in seen:
            raise SchemaError(f"duplicate concern id {c.id}", source=source)
        seen.add(c.id)
    return AgenticReview(
        paper_id=_text(raw["paper_id"], "paper_id", "sheet", source),
        system_id=_text(raw["system_id"], "system_id", "sheet", source),
        run_id=_text(raw["run_id"], "run_id", "sheet", source),
        concerns=concerns,
        native_verdict=native,
    )


def agentic_sheet_to_dict(review: AgenticReview) -> dict:
    return {
        "paper_id": review.paper_id,
        "system_id": review.system_id,
        "run_id": review.run_id,
        "native_verdict": review.native_verdict.value if review.native_verdict else None,
        "concerns": [
            {
                "id": c.id,
                "statement": c.statement,
                "severity": c.severity.value,
                "decisive": c.decisive,
                "addressability": c.addressability.value,
                "mechanism": c.mechanism,
                "origin": c.origin,
                "source_detail": c.source_detail,
            }
            for c in review.concerns
        ],
    }


# -- manifest -------------------------------------------------------------------


def parse_manifest(
    data: bytes | str | dict,
    root: Path | str,
    *,
    source: str | None = None,
    check_files: bool = True,
) -> CorpusManifest:
    """Parse a corpus manifest; relative paths resolve against ``root``.

    Layout::

        {"papers":  [{"paper_id": ..., "official_sheet": "papers/P01.json"}],
         "systems": [{"system_id": ..., "model_id": ..., "runs": ["r1", ...]}],
         "graphs":  [{"paper_id", "system_id", "run_id",
                      "graph": ..., "agentic_sheet": ..., "gate": ... (optional)}]}

    Only existence is checked here; whether each graph file agrees with its
    key is checked when the corpus is loaded.
    """
    raw = _load(data, source)
    root = Path(root)
    _check_fields(raw, ("papers", "systems", "graphs"), (), "manifest", source)

    def resolve(rel: Any, where: str) -> Path:
        path = root / _text(rel, "path", where, source)
        if check_files and not path.is_file():
            raise SchemaError(f"{where}: dangling reference to {rel!r}", source=source)
        return path

    papers: dict[str, Path] = {}
    for i, p in enumerate(raw["papers"]):
        where = f"papers[{i}]"
        _check_fields(p, ("paper_id", "official_sheet"), (), where, source)
        pid = _text(p["paper_id"], "paper_id", where, source)
        if pid in papers:
            raise SchemaError(f"{where}: duplicate paper {pid}", source=source)
        papers[pid] = resolve(p["official_sheet"], where)

    systems = []
    for i, s in enumerate(raw["systems"]):
        where = f"systems[{i}]"
        _check_fields(s, ("system_id", "model_id", "runs"), (), where, source)
        runs = _str_list(s["runs"], "runs", where, source)
        if len(set(runs)) != len(runs):
            raise SchemaError(f"{where}: duplicate run id", source=source)
        systems.append(
            SystemEntry(
                system_id=_text(s["system_id"], "system_id", where, source),
                model_id=_text(s["model_id"], "model_id", where, source, nonempty=False),
                runs=runs,
            )
        )
    if len({s.system_id for s in systems}) != len(systems):
        raise SchemaError("manifest: duplicate system id", source=source)
    runs_by_system = {s.system_id: set(s.runs) for s in systems}

    index: dict[tuple[str, str, str], GraphRef] = {}
    for i, g in enumerate(raw["graphs"]):
        where = f"graphs[{i}]"
        _check_fields(g, ("paper_id", "system_id", "run_id", "graph", "agentic_sheet"), ("gate",), where, source)
        key = (
            _text(g["paper_id"], "paper_id", where, source),
            _text(g["system_id"], "system_id", where, source),
            _text(g["run_id"], "run_id", where, source),
        )
        if key in index:
            raise SchemaError(f"{where}: duplicate graph key {'/'.join(key)}", source=source)
        if key[0] not in papers:
            raise SchemaError(f"{where}: unknown paper {key[0]}", source=source)
        if key[2] not in runs_by_system.get(key[1], ()):
            raise SchemaError(f"{where}: run {key[2]} is not declared for system {key[1]}", source=source)
        gate = g.get("gate")
        index[key] = GraphRef(
            graph=resolve(g["graph"], where),
            agentic_sheet=resolve(g["agentic_sheet"], where),
            gate=resolve(gate, where) if gate is not None else None,
        )
    return CorpusManifest(root=root, papers=papers, systems=tuple(systems), graph_index=index)


def load_manifest(path: Path | str, *, check_files: bool = True) -> CorpusManifest:
    path = Path(path)
    return parse_manifest(path.read_bytes(), path.parent, source=str(path), check_files=check_files)


def load_official_sheet(path: Path | str) -> PaperRecord:
    path = Path(path)
    return parse_official_sheet(path.read_bytes(), source=str(path))


def load_agentic_sheet(path: Path | str) -> AgenticReview:
    path = Path(path)
    return parse_agentic_sheet(path.read_bytes(), source=str(path))
