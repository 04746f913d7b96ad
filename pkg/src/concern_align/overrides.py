"""Audit worksheets, verifier overrides, and graph diffs."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Sequence

from .concerns import AgenticConcern, OfficialConcern, PaperRecord, SchemaError, _check_fields, _enum, _load, _text, concern_sort_key
from .graph import (
    EDGE_CAP,
    Diagnostic,
    JudgmentAlignment,
    MatchEdge,
    MatchGraph,
    MatchType,
    SeverityAlignment,
    SeverityPolicy,
    derive_unmatched,
    has_errors,
    lint_graph,
    severity_alignment,
    sort_edges,
)
from .metrics import METRIC_NAMES


class OverrideError(ValueError):
    def __init__(self, message: str, diagnostics: Sequence[Diagnostic] = ()):
        self.diagnostics = tuple(diagnostics)
        super().__init__(message)


class OverrideKind(str, Enum):
    RECLASSIFY = "reclassify"
    INSERT = "insert"
    REMOVE = "remove"


@dataclass(frozen=True)
class OverrideEntry:
    kind: OverrideKind
    official_id: str
    agentic_id: str
    rationale: str = ""
    new_match_type: MatchType | None = None
    new_severity_alignment: SeverityAlignment | None = None
    new_judgment_alignment: JudgmentAlignment | None = None

    def __post_init__(self):
        pinned = (self.new_match_type, self.new_severity_alignment, self.new_judgment_alignment)
        if self.kind is OverrideKind.RECLASSIFY and all(v is None for v in pinned):
            raise ValueError(f"reclassify {self.label} sets no new label")
        if self.kind is OverrideKind.INSERT and self.new_match_type is None:
            raise ValueError(f"insert {self.label} needs new_match_type")
        if self.kind is OverrideKind.REMOVE and any(v is not None for v in pinned):
            raise ValueError(f"remove {self.label} cannot carry new labels")

    @property
    def label(self) -> str:
        return f"{self.official_id}-{self.agentic_id}"


_OVERRIDE_FIELDS = ("kind", "official_id", "agentic_id", "rationale")
_OVERRIDE_OPTIONAL = ("new_match_type", "new_severity_alignment", "new_judgment_alignment")


def parse_overrides(data: bytes | str | list, *, source: str | None = None) -> list[OverrideEntry]:
    raw = _load(data, source)
    if not isinstance(raw, list):
        raise SchemaError("overrides file must be a JSON list", source=source)
    entries = []
    for i, item in enumerate(raw):
        where = f"overrides[{i}]"
        _check_fields(item, _OVERRIDE_FIELDS, _OVERRIDE_OPTIONAL, where, source)
        opt = {}
        for name, cls in zip(_OVERRIDE_OPTIONAL, (MatchType, SeverityAlignment, JudgmentAlignment)):
            if item.get(name) is not None:
                opt[name] = _enum(cls, item[name], name, where, source)
        try:
            entries.append(
                OverrideEntry(
                    kind=_enum(OverrideKind, item["kind"], "kind", where, source),
                    official_id=_text(item["official_id"], "official_id", where, source),
                    agentic_id=_text(item["agentic_id"], "agentic_id", where, source),
                    rationale=_text(item["rationale"], "rationale", where, source, nonempty=False),
                    **opt,
                )
            )
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{where}: {exc}", source=source) from None
    return entries


def override_to_dict(entry: OverrideEntry) -> dict[str, Any]:
    d: dict[str, Any] = {
        "kind": entry.kind.value,
        "official_id": entry.official_id,
        "agentic_id": entry.agentic_id,
        "rationale": entry.rationale,
    }
    for name in _OVERRIDE_OPTIONAL:
        v = getattr(entry, name)
        if v is not None:
            d[name] = v.value
    return d


def _label_for(policy, match_type, o: OfficialConcern, a: AgenticConcern, pinned):
    if pinned is not None:
        return pinned
    if not match_type.is_strict:
        return SeverityAlignment.NOT_APPLICABLE
    return severity_alignment(policy, o.severity, a.severity)


def apply_overrides(
    g: MatchGraph,
    entries: Iterable[OverrideEntry],
    policy: SeverityPolicy = SeverityPolicy.HYBRID,
) -> MatchGraph:
    """Apply overrides in order and return the corrected graph.

    Either every entry applies and the result passes lint, or OverrideError
    is raised and nothing is returned; ``g`` itself is never modified.
    """
    before = lint_graph(g, policy)
    if has_errors(before):
        raise OverrideError(f"{g.paper_id}/{g.system_id}/{g.run_id}: input graph fails lint", before)
    entries = list(entries)
    if not entries:
        return g
    off = g.official_by_id()
    ag = g.agentic_by_id()
    edges: dict[tuple[str, str], MatchEdge] = {e.key: e for e in g.edges}

    for n, entry in enumerate(entries):
        where = f"override #{n + 1} ({entry.kind.value} {entry.label})"
        key = (entry.official_id, entry.agentic_id)
        if entry.official_id not in off or entry.agentic_id not in ag:
            raise OverrideError(f"{where}: endpoint does not exist in {g.paper_id}")
        o, a = off[entry.official_id], ag[entry.agentic_id]
        existing = edges.get(key)
        if entry.kind is OverrideKind.REMOVE:
            if existing is None:
                raise OverrideError(f"{where}: no such edge")
            del edges[key]
        elif entry.kind is OverrideKind.RECLASSIFY:
            if existing is None:
                raise OverrideError(f"{where}: no such edge")
            mt = entry.new_match_type or existing.match_type
            edges[key] = replace(
                existing,
                match_type=mt,
                severity_alignment=_label_for(policy, mt, o, a, entry.new_severity_alignment),
                judgment_alignment=entry.new_judgment_alignment or existing.judgment_alignment,
            )
        else:
            if existing is not None:
                raise OverrideError(f"{where}: edge already exists")
            for cid in key:
                used = sum(1 for k in edges if cid in k)
                if used >= EDGE_CAP:
                    raise OverrideError(f"{where}: {cid} already has {used} edges (cap is {EDGE_CAP})")
            mt = entry.new_match_type
            edges[key] = MatchEdge(
                official_id=entry.official_id,
                agentic_id=entry.agentic_id,
                match_type=mt,
                severity_alignment=_label_for(policy, mt, o, a, entry.new_severity_alignment),
                judgment_alignment=entry.new_judgment_alignment or JudgmentAlignment.NOT_APPLICABLE,
            )

    new_edges = sort_edges(edges.values())
    uo, ua = derive_unmatched(g.official, g.agentic, new_edges)
    out = replace(g, edges=new_edges, unmatched_official=uo, unmatched_agentic=ua)
    after = lint_graph(out, policy)
    if has_errors(after):
        raise OverrideError(f"{g.paper_id}/{g.system_id}/{g.run_id}: overrides leave graph failing lint", after)
    return out


# -- diffs ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphDiff:
    key: tuple[str, str, str]
    added: tuple[MatchEdge, ...] = ()
    removed: tuple[MatchEdge, ...] = ()
    relabeled: tuple[tuple[MatchEdge, MatchEdge], ...] = ()
    unmatched_official_added: tuple[str, ...] = ()
    unmatched_official_removed: tuple[str, ...] = ()
    unmatched_agentic_added: tuple[str, ...] = ()
    unmatched_agentic_removed: tuple[str, ...] = ()
    concerns_changed: tuple[str, ...] = ()
    metadata_changed: bool = False

    @property
    def is_empty(self) -> bool:
        return not (
            self.added
            or self.removed
            or self.relabeled
            or self.unmatched_official_added
            or self.unmatched_official_removed
            or self.unmatched_agentic_added
            or self.unmatched_agentic_removed
            or self.concerns_changed
            or self.metadata_changed
        )

    def endpoints(self) -> set[str]:
        ids: set[str] = set()
        for e in (*self.added, *self.removed, *(b for b, _ in self.relabeled)):
            ids.update(e.key)
        ids.update(self.unmatched_official_added, self.unmatched_official_removed)
        ids.update(self.unmatched_agentic_added, self.unmatched_agentic_removed)
        ids.update(self.concerns_changed)
        return ids

    def summary_lines(self) -> list[str]:
        prefix = "/".join(self.key)
        lines = [f"{prefix}: -edge {e.label} ({e.match_type.value})" for e in self.removed]
        lines += [f"{prefix}: +edge {e.label} ({e.match_type.value})" for e in self.added]
        for b, a in self.relabeled:
            changes = [
                f"{f} {getattr(b, f).value}->{getattr(a, f).value}"
                for f in ("match_type", "severity_alignment", "judgment_alignment")
                if getattr(b, f) is not getattr(a, f)
            ]
            lines.append(f"{prefix}: ~edge {b.label} {', '.join(changes)}")
        for side in ("official", "agentic"):
            for cid in getattr(self, f"unmatched_{side}_added"):
                lines.append(f"{prefix}: +unmatched_{side} {cid}")
            for cid in getattr(self, f"unmatched_{side}_removed"):
                lines.append(f"{prefix}: -unmatched_{side} {cid}")
        lines += [f"{prefix}: ~concern {cid}" for cid in self.concerns_changed]
        return lines


def _ids(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(items, key=concern_sort_key))


def diff_graphs(before: MatchGraph, after: MatchGraph) -> GraphDiff:
    if before.key != after.key:
        raise ValueError(f"cannot diff {'/'.join(before.key)} against {'/'.join(after.key)}")
    b_edges = {e.key: e for e in before.edges}
    a_edges = {e.key: e for e in after.edges}
    order = lambda k: (concern_sort_key(k[0]), concern_sort_key(k[1]))  # noqa: E731
    concerns_changed = set()
    for side in ("official", "agentic"):
        b = {c.id: c for c in getattr(before, side)}
        a = {c.id: c for c in getattr(after, side)}
        concerns_changed.update(cid for cid in b.keys() | a.keys() if b.get(cid) != a.get(cid))
        if [c.id for c in getattr(before, side)] != [c.id for c in getattr(after, side)]:
            concerns_changed.update(b.keys() ^ a.keys())
    uo_b, uo_a = set(before.unmatched_official), set(after.unmatched_official)
    ua_b, ua_a = set(before.unmatched_agentic), set(after.unmatched_agentic)
    diff = GraphDiff(
        key=before.key,
        added=tuple(a_edges[k] for k in sorted(a_edges.keys() - b_edges.keys(), key=order)),
        removed=tuple(b_edges[k] for k in sorted(b_edges.keys() - a_edges.keys(), key=order)),
        relabeled=tuple(
            (b_edges[k], a_edges[k])
            for k in sorted(a_edges.keys() & b_edges.keys(), key=order)
            if a_edges[k] != b_edges[k]
        ),
        unmatched_official_added=_ids(uo_a - uo_b),
        unmatched_official_removed=_ids(uo_b - uo_a),
        unmatched_agentic_added=_ids(ua_a - ua_b),
        unmatched_agentic_removed=_ids(ua_b - ua_a),
        concerns_changed=_ids(concerns_changed),
    )
    # ordering-only or verdict differences still make the graphs unequal
    if diff.is_empty and before != after:
        diff = replace(diff, metadata_changed=True)
    return diff


# -- worksheets ---------------------------------------------------------------------------

WORKSHEET_HEADERS = ("STRICT EDGES", "UNMATCHED OFFICIAL", "UNMATCHED AGENTIC", "RELATED (context)")

VERDICT_TOKENS = ("accept", "reject")
ERROR_CATEGORY_LABELS = (
    "scope_inflation",
    "eval_scope_vs_methodology",
    "topic_conflation",
    "writing_vs_content_confusion",
    "severity_arithmetic_error",
    "theory_sub_issue_confusion",
)
ISOLATION_TOKENS = VERDICT_TOKENS + METRIC_NAMES + ERROR_CATEGORY_LABELS
REDACTED = "[redacted]"


def _token_pattern(token: str) -> str:
    # error-category and metric identifiers also match when written with spaces or hyphens
    return r"[\s_-]?".join(re.escape(part) for part in re.split(r"[_\s-]+", token) if part)


_ISOLATION_RE = re.compile(
    "|".join(_token_pattern(t) for t in sorted(ISOLATION_TOKENS, key=len, reverse=True)),
    re.IGNORECASE,
)


def redact(text: str) -> str:
    """Mask any outcome, score or error-category vocabulary in free text."""
    prev = None
    while prev != text:
        prev, text = text, _ISOLATION_RE.sub(REDACTED, text)
    return text


def isolation_violations(text: str) -> list[str]:
    return [m.group(0) for m in _ISOLATION_RE.finditer(text)]


@dataclass(frozen=True)
class Worksheet:
    key: tuple[str, str, str]
    strict: tuple[str, ...] = ()
    unmatched_official: tuple[str, ...] = ()
    unmatched_agentic: tuple[str, ...] = ()
    related: tuple[str, ...] = ()

    def render(self) -> str:
        paper, system, run = (redact(x) for x in self.key)
        lines = [f"AUDIT WORKSHEET paper={paper} system={system} run={run}", ""]
        for header, rows in zip(
            WORKSHEET_HEADERS, (self.strict, self.unmatched_official, self.unmatched_agentic, self.related)
        ):
            lines.append(f"== {header} ({len(rows)}) ==")
            if not rows:
                lines.append("(none)")
            for row in rows:
                lines.extend(row.splitlines())
                lines.append("")
            if rows:
                lines.pop()
            lines.append("")
        return "\n".join(lines)


def _official_block(o: OfficialConcern, indent: str = "  ") -> list[str]:
    lines = [f"{indent}official {o.id} [{o.severity.value}]: {redact(o.statement)}"]
    lines += [f'{indent}  evidence: "{redact(q)}"' for q in o.evidence_quotes]
    return lines


def _agentic_block(a: AgenticConcern, indent: str = "  ") -> list[str]:
    flag = ", flagged decisive" if a.decisive else ""
    lines = [f"{indent}agentic {a.id} [{a.severity.value}{flag}]: {redact(a.statement)}"]
    if a.source_detail:
        lines.append(f"{indent}  source: {redact(a.source_detail)}")
    return lines


def generate_worksheet(g: MatchGraph, paper: PaperRecord | None = None) -> Worksheet:
    """Render the four audit sections for one graph.

    Only local concern text, evidence and edge labels are read.  The paper's
    verdict and AC treatment labels are left out because either one reveals
    the outcome; free text is passed through :func:`redact`.
    """
    diags = lint_graph(g)
    if has_errors(diags):
        raise OverrideError(f"{'/'.join(g.key)}: worksheet refused, graph fails lint", diags)
    if paper is not None and paper.paper_id != g.paper_id:
        raise ValueError(f"paper {paper.paper_id} does not belong to graph {g.paper_id}")
    off = {c.id: c for c in (paper.official_concerns if paper else g.official)}
    ag = g.agentic_by_id()

    def edge_row(e: MatchEdge) -> str:
        o, a = off[e.official_id], ag[e.agentic_id]
        head = f"[{e.official_id} ~ {e.agentic_id}] {e.match_type.value}"
        if e.match_type.is_strict:
            head += (
                f" | severity {o.severity.value} -> {a.severity.value}: {e.severity_alignment.value}"
                f" | judgment: {e.judgment_alignment.value}"
            )
        return "\n".join([head, *_official_block(o), *_agentic_block(a)])

    strict = [edge_row(e) for e in sort_edges(e for e in g.edges if e.match_type.is_strict)]
    related = [edge_row(e) for e in sort_edges(e for e in g.edges if not e.match_type.is_strict)]
    uo = ["\n".join(_official_block(off[c], indent="")) for c in sorted(g.unmatched_official, key=concern_sort_key)]
    ua = ["\n".join(_agentic_block(ag[c], indent="")) for c in sorted(g.unmatched_agentic, key=concern_sort_key)]
    return Worksheet(
        key=g.key,
        strict=tuple(strict),
        unmatched_official=tuple(uo),
        unmatched_agentic=tuple(ua),
        related=tuple(related),
    )
