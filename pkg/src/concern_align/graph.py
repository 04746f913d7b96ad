"""Bipartite match graphs between official and agentic concerns.

A graph is built from upstream edge proposals (the scope test itself happens
outside this package).  Unmatched lists are always derived from the edges;
stated lists in graph files are treated as claims that the lint gate checks.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .concerns import (
    AgenticConcern,
    AgenticReview,
    OfficialConcern,
    PaperRecord,
    SchemaError,
    Severity,
    Verdict,
    _check_fields,
    _enum,
    _load,
    _text,
    concern_sort_key,
    severity_gap,
)

EDGE_CAP = 2


class GraphError(ValueError):
    """A proposed graph violates a structural rule (dangling, duplicate, cap)."""


class MatchType(str, Enum):
    EXACT = "exact"
    PARTIAL = "partial"
    RELATED = "related"

    @property
    def is_strict(self) -> bool:
        return self is not MatchType.RELATED


class SeverityAlignment(str, Enum):
    MATCH = "match"
    UNDER = "under"
    OVER = "over"
    NOT_APPLICABLE = "not_applicable"


class JudgmentAlignment(str, Enum):
    ALIGNED = "aligned"
    INVERTED = "inverted"
    MIXED = "mixed"
    NOT_APPLICABLE = "not_applicable"


class SeverityPolicy(str, Enum):
    STRICT = "strict"
    HYBRID = "hybrid"
    TOLERANT = "tolerant"


class InclusionPolicy(str, Enum):
    STRICT_ONLY = "strict_only"
    STRICT_PARTIAL = "strict_partial"
    LOOSE = "loose"


_INCLUDED = {
    InclusionPolicy.STRICT_ONLY: frozenset({MatchType.EXACT}),
    InclusionPolicy.STRICT_PARTIAL: frozenset({MatchType.EXACT, MatchType.PARTIAL}),
    InclusionPolicy.LOOSE: frozenset(MatchType),
}


def severity_alignment(policy: SeverityPolicy, official: Severity, agentic: Severity) -> SeverityAlignment:
    """Label an edge's severity agreement; direction is agentic relative to official."""
    gap = severity_gap(official, agentic)
    if gap is None:
        return SeverityAlignment.NOT_APPLICABLE
    if gap == 0:
        return SeverityAlignment.MATCH
    if gap == 1:
        if policy is SeverityPolicy.TOLERANT:
            return SeverityAlignment.MATCH
        if policy is SeverityPolicy.HYBRID and Severity.FATAL not in (official, agentic):
            return SeverityAlignment.MATCH
    return SeverityAlignment.UNDER if agentic.rank < official.rank else SeverityAlignment.OVER


@dataclass(frozen=True)
class MatchEdge:
    official_id: str
    agentic_id: str
    match_type: MatchType
    severity_alignment: SeverityAlignment = SeverityAlignment.NOT_APPLICABLE
    judgment_alignment: JudgmentAlignment = JudgmentAlignment.NOT_APPLICABLE

    @property
    def key(self) -> tuple[str, str]:
        return (self.official_id, self.agentic_id)

    @property
    def label(self) -> str:
        return f"{self.official_id}-{self.agentic_id}"


def _edge_sort_key(e: MatchEdge):
    return (concern_sort_key(e.official_id), concern_sort_key(e.agentic_id))


def sort_edges(edges: Iterable[MatchEdge]) -> tuple[MatchEdge, ...]:
    return tuple(sorted(edges, key=_edge_sort_key))


@dataclass(frozen=True)
class MatchGraph:
    paper_id: str
    system_id: str
    run_id: str
    official: tuple[OfficialConcern, ...]
    agentic: tuple[AgenticConcern, ...]
    edges: tuple[MatchEdge, ...]
    unmatched_official: tuple[str, ...]
    unmatched_agentic: tuple[str, ...]
    # carried for metric stratification; never rendered into worksheets
    official_verdict: Verdict | None = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.paper_id, self.system_id, self.run_id)

    def official_by_id(self) -> dict[str, OfficialConcern]:
        return {c.id: c for c in self.official}

    def agentic_by_id(self) -> dict[str, AgenticConcern]:
        return {c.id: c for c in self.agentic}

    def edge(self, official_id: str, agentic_id: str) -> MatchEdge | None:
        for e in self.edges:
            if e.official_id == official_id and e.agentic_id == agentic_id:
                return e
        return None


def strict_edge_set(g: MatchGraph, inc: InclusionPolicy = InclusionPolicy.STRICT_PARTIAL) -> list[MatchEdge]:
    kinds = _INCLUDED[inc]
    return [e for e in g.edges if e.match_type in kinds]


def derive_unmatched(
    official: Iterable[OfficialConcern],
    agentic: Iterable[AgenticConcern],
    edges: Iterable[MatchEdge],
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Concerns with no exact/partial edge; related-only concerns stay unmatched."""
    edges = [e for e in edges if e.match_type.is_strict]
    covered_o = {e.official_id for e in edges}
    covered_a = {e.agentic_id for e in edges}
    uo = sorted((c.id for c in official if c.id not in covered_o), key=concern_sort_key)
    ua = sorted((c.id for c in agentic if c.id not in covered_a), key=concern_sort_key)
    return tuple(uo), tuple(ua)


def _relabelled(edge: MatchEdge, o: OfficialConcern, a: AgenticConcern, policy: SeverityPolicy) -> MatchEdge:
    if not edge.match_type.is_strict:
        label = SeverityAlignment.NOT_APPLICABLE
    else:
        label = severity_alignment(policy, o.severity, a.severity)
    if label is edge.severity_alignment:
        return edge
    return replace(edge, severity_alignment=label)


def relabel_alignments(g: MatchGraph, policy: SeverityPolicy = SeverityPolicy.HYBRID) -> MatchGraph:
    """Recompute every edge's severity label from the endpoint severities."""
    off = g.official_by_id()
    ag = g.agentic_by_id()
    edges = tuple(_relabelled(e, off[e.official_id], ag[e.agentic_id], policy) for e in g.edges)
    if edges == g.edges:
        return g
    return replace(g, edges=edges)


def check_edges(
    official: Iterable[OfficialConcern],
    agentic: Iterable[AgenticConcern],
    edges: Iterable[MatchEdge],
) -> None:
    """Raise GraphError on the first dangling endpoint, duplicate pair or cap overflow."""
    o_ids = {c.id for c in official}
    a_ids = {c.id for c in agentic}
    seen: set[tuple[str, str]] = set()
    o_count: Counter[str] = Counter()
    a_count: Counter[str] = Counter()
    for e in edges:
        if e.official_id not in o_ids:
            raise GraphError(f"edge {e.label}: dangling official endpoint {e.official_id}")
        if e.agentic_id not in a_ids:
            raise GraphError(f"edge {e.label}: dangling agentic endpoint {e.agentic_id}")
        if e.key in seen:
            raise GraphError(f"duplicate edge {e.label}")
        seen.add(e.key)
        o_count[e.official_id] += 1
        a_count[e.agentic_id] += 1
    for cid, n in sorted({**o_count, **a_count}.items()):
        if n > EDGE_CAP:
            raise GraphError(f"concern {cid} appears in {n} edges (cap is {EDGE_CAP})")


def build_graph(
    paper: PaperRecord,
    review: AgenticReview,
    proposed_edges: Iterable[MatchEdge],
    policy: SeverityPolicy = SeverityPolicy.HYBRID,
) -> MatchGraph:
    if review.paper_id != paper.paper_id:
        raise GraphError(f"agentic sheet is for paper {review.paper_id}, not {paper.paper_id}")
    edges = list(proposed_edges)
    check_edges(paper.official_concerns, review.concerns, edges)
    uo, ua = derive_unmatched(paper.official_concerns, review.concerns, edges)
    g = MatchGraph(
        paper_id=paper.paper_id,
        system_id=review.system_id,
        run_id=review.run_id,
        official=paper.official_concerns,
        agentic=review.concerns,
        edges=sort_edges(edges),
        unmatched_official=uo,
        unmatched_agentic=ua,
        official_verdict=paper.official_verdict,
    )
    return relabel_alignments(g, policy)


def rederive(g: MatchGraph) -> MatchGraph:
    uo, ua = derive_unmatched(g.official, g.agentic, g.edges)
    return replace(g, edges=sort_edges(g.edges), unmatched_official=uo, unmatched_agentic=ua)


# -- lint -------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    location: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity == "error"

    def format(self) -> str:
        return f"{self.severity} {self.code} {self.location}: {self.message}"


def lint_graph(g: MatchGraph, policy: SeverityPolicy = SeverityPolicy.HYBRID) -> list[Diagnostic]:
    """Structural checks run before any metric is computed.

    The two-edge cap is applied across all edge kinds, related included.
    """
    out: list[Diagnostic] = []

    def emit(sev: str, code: str, loc: str, msg: str) -> None:
        out.append(Diagnostic(sev, code, f"{g.paper_id}/{loc}", msg))

    off = g.official_by_id()
    ag = g.agentic_by_id()
    seen: set[tuple[str, str]] = set()
    counts: Counter[str] = Counter()
    for e in g.edges:
        dangling = False
        if e.official_id not in off:
            emit("error", "DANGLING_ENDPOINT", e.label, f"official concern {e.official_id} does not exist")
            dangling = True
        if e.agentic_id not in ag:
            emit("error", "DANGLING_ENDPOINT", e.label, f"agentic concern {e.agentic_id} does not exist")
            dangling = True
        if e.key in seen:
            emit("error", "DUPLICATE_EDGE", e.label, "endpoint pair appears more than once")
        seen.add(e.key)
        counts[e.official_id] += 1
        counts[e.agentic_id] += 1

        if not e.match_type.is_strict:
            if e.severity_alignment is not SeverityAlignment.NOT_APPLICABLE:
                emit(
                    "error",
                    "ILLEGAL_RELATED_SEVERITY",
                    e.label,
                    f"related edge carries severity_alignment={e.severity_alignment.value}",
                )
            continue
        if e.judgment_alignment is JudgmentAlignment.NOT_APPLICABLE:
            emit("warning", "MISSING_JUDGMENT", e.label, f"{e.match_type.value} edge has no judgment alignment")
        if not dangling:
            derived = severity_alignment(policy, off[e.official_id].severity, ag[e.agentic_id].severity)
            if derived is not e.severity_alignment:
                emit(
                    "warning",
                    "STALE_SEVERITY_LABEL",
                    e.label,
                    f"stated {e.severity_alignment.value}, raw severities give {derived.value} "
                    f"under {policy.value}",
                )

    for cid in sorted(counts, key=concern_sort_key):
        if counts[cid] > EDGE_CAP:
            emit("error", "EDGE_CAP", cid, f"concern appears in {counts[cid]} edges (cap is {EDGE_CAP})")

    valid_edges = [e for e in g.edges if e.official_id in off and e.agentic_id in ag]
    uo, ua = derive_unmatched(g.official, g.agentic, valid_edges)
    for stated, derived, side in (
        (g.unmatched_official, uo, "official"),
        (g.unmatched_agentic, ua, "agentic"),
    ):
        stated_set, derived_set = set(stated), set(derived)
        for cid in sorted(stated_set - derived_set, key=concern_sort_key):
            if cid in off or cid in ag:
                msg = f"listed as unmatched {side} but has a strict edge"
            else:
                msg = f"listed as unmatched {side} but no such concern exists"
            emit("error", "UNMATCHED_INCONSISTENT", cid, msg)
        for cid in sorted(derived_set - stated_set, key=concern_sort_key):
            emit("error", "UNMATCHED_INCONSISTENT", cid, f"has no strict edge but is missing from unmatched_{side}")
        if len(stated) != len(stated_set):
            emit("error", "UNMATCHED_INCONSISTENT", f"unmatched_{side}", "list contains duplicates")

    for c in g.official:
        if c.decisive and c.severity is Severity.MINOR:
            emit("warning", "IMPLAUSIBLE_COMBO", c.id, "minor concern marked decisive")
    return out


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


# -- graph files ----------------------------------------------------------------

_GRAPH_FIELDS = ("paper_id", "system_id", "run_id", "edges", "unmatched_official", "unmatched_agentic")
_EDGE_FIELDS = ("official_id", "agentic_id", "match_type", "severity_alignment", "judgment_alignment")


def parse_edges(raw_edges: Any, *, source: str | None = None) -> list[MatchEdge]:
    if not isinstance(raw_edges, list):
        raise SchemaError("edges must be a list", source=source)
    edges = []
    for i, raw in enumerate(raw_edges):
        where = f"edges[{i}]"
        _check_fields(raw, _EDGE_FIELDS[:3], _EDGE_FIELDS[3:], where, source)
        edges.append(
            MatchEdge(
                official_id=_text(raw["official_id"], "official_id", where, source),
                agentic_id=_text(raw["agentic_id"], "agentic_id", where, source),
                match_type=_enum(MatchType, raw["match_type"], "match_type", where, source),
                severity_alignment=_enum(
                    SeverityAlignment,
                    raw.get("severity_alignment", "not_applicable"),
                    "severity_alignment",
                    where,
                    source,
                ),
                judgment_alignment=_enum(
                    JudgmentAlignment,
                    raw.get("judgment_alignment", "not_applicable"),
                    "judgment_alignment",
                    where,
                    source,
                ),
            )
        )
    return edges


def parse_graph(
    data: bytes | str | dict,
    paper: PaperRecord,
    review: AgenticReview,
    *,
    source: str | None = None,
) -> MatchGraph:
    """Load a graph file as stated, without deriving or fixing anything.

    Use :func:`lint_graph` on the result before computing metrics.
    """
    raw = _load(data, source)
    _check_fields(raw, _GRAPH_FIELDS, (), "graph", source)
    key = tuple(_text(raw[k], k, "graph", source) for k in ("paper_id", "system_id", "run_id"))
    expected = (paper.paper_id, review.system_id, review.run_id)
    if review.paper_id != paper.paper_id or key != expected:
        raise SchemaError(
            f"graph key {'/'.join(key)} does not agree with sheets {'/'.join(expected)}",
            source=source,
        )
    for side in ("unmatched_official", "unmatched_agentic"):
        if not isinstance(raw[side], list) or not all(isinstance(x, str) for x in raw[side]):
            raise SchemaError(f"{side} must be a list of ids", source=source)
    return MatchGraph(
        paper_id=key[0],
        system_id=key[1],
        run_id=key[2],
        official=paper.official_concerns,
        agentic=review.concerns,
        edges=tuple(parse_edges(raw["edges"], source=source)),
        unmatched_official=tuple(raw["unmatched_official"]),
        unmatched_agentic=tuple(raw["unmatched_agentic"]),
        official_verdict=paper.official_verdict,
    )


def edge_to_dict(e: MatchEdge) -> dict:
    return {
        "official_id": e.official_id,
        "agentic_id": e.agentic_id,
        "match_type": e.match_type.value,
        "severity_alignment": e.severity_alignment.value,
        "judgment_alignment": e.judgment_alignment.value,
    }


def graph_to_dict(g: MatchGraph) -> dict:
    return {
        "paper_id": g.paper_id,
        "system_id": g.system_id,
        "run_id": g.run_id,
        "edges": [edge_to_dict(e) for e in g.edges],
        "unmatched_official": list(g.unmatched_official),
        "unmatched_agentic": list(g.unmatched_agentic),
    }


def dump_json(obj: Any, path: Path) -> None:
    """Canonical on-disk form: sorted keys, two-space indent, trailing newline."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
