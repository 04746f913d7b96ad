"""Small builders shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from concern_align.concerns import (
    AcTreatment,
    AgenticConcern,
    AgenticReview,
    OfficialConcern,
    PaperRecord,
    PdfState,
    Severity,
    Verdict,
    agentic_sheet_to_dict,
    official_sheet_to_dict,
)
from concern_align.graph import (
    JudgmentAlignment,
    MatchEdge,
    MatchType,
    SeverityPolicy,
    build_graph,
    dump_json,
    graph_to_dict,
)

S = Severity
T = AcTreatment

# One pass/fail line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def oc(cid, sev, treatment=T.UNRESOLVED, pdf=None, statement="official text"):
    if pdf is None:
        state = PdfState.NOT_APPLICABLE
    else:
        state = PdfState.ADDRESSED if pdf else PdfState.NOT_ADDRESSED
    return OfficialConcern(cid, statement, S(sev), T(treatment), T(treatment) is T.DECISIVE_BLOCKER, state)


def ac(cid, sev, decisive=False, statement="agentic text"):
    return AgenticConcern(cid, statement, S(sev), decisive)


def edge(o, a, kind="exact", judgment="aligned"):
    mt = MatchType(kind)
    ja = JudgmentAlignment(judgment) if mt.is_strict else JudgmentAlignment.NOT_APPLICABLE
    return MatchEdge(o, a, mt, judgment_alignment=ja)


def graph(official, agentic, edges=(), verdict="accept", policy=SeverityPolicy.HYBRID,
          paper_id="P1", system_id="sys1", run_id="r1", native=None):
    paper = PaperRecord(paper_id, Verdict(verdict), "venue", False, tuple(official))
    review = AgenticReview(paper_id, system_id, run_id, tuple(agentic),
                           native_verdict=Verdict(native) if native else None)
    return build_graph(paper, review, [e if isinstance(e, MatchEdge) else edge(*e) for e in edges], policy)


def paper_of(g):
    return PaperRecord(g.paper_id, g.official_verdict, "venue", False, g.official)


# The worked accepted-paper example: three decisive flags, one of them
# excused because its matched concern was resolved without a visible fix.
WORKED_OFFICIAL = (
    oc("O1", "moderate", T.RESOLVED, pdf=False),
    oc("O2", "moderate", T.RESOLVED, pdf=True),
    oc("O3", "major", T.ACCEPTED_LIMITATION),
    oc("O4", "moderate", T.DISMISSED),
    oc("O5", "minor", T.NOT_MENTIONED),
    oc("O6", "moderate", T.UNRESOLVED),
)
WORKED_AGENTIC = (
    ac("A1", "fatal", True),
    ac("A2", "fatal", True),
    ac("A3", "major"),
    ac("A4", "minor"),
    ac("A5", "moderate"),
    ac("A6", "fatal", True),
)
WORKED_EDGES = (
    ("O1", "A1", "partial"),
    ("O2", "A2", "exact"),
    ("O3", "A3", "exact"),
    ("O4", "A4", "partial"),
    ("O5", "A5", "related"),
)


def worked_graph(**kw):
    return graph(WORKED_OFFICIAL, WORKED_AGENTIC, WORKED_EDGES, verdict="accept", **kw)


def write_corpus(root, graphs, gates=None, model="m"):
    """Write sheets, graph files and a manifest for in-memory graphs."""
    root = Path(root)
    gates = gates or {}
    manifest = {"papers": [], "systems": [], "graphs": []}
    runs: dict[str, list[str]] = {}
    for g in graphs:
        if g.paper_id not in {p["paper_id"] for p in manifest["papers"]}:
            rel = f"papers/{g.paper_id}.json"
            dump_json(official_sheet_to_dict(paper_of(g)), root / rel)
            manifest["papers"].append({"paper_id": g.paper_id, "official_sheet": rel})
        runs.setdefault(g.system_id, [])
        if g.run_id not in runs[g.system_id]:
            runs[g.system_id].append(g.run_id)
        base = f"runs/{g.system_id}/{g.run_id}/{g.paper_id}"
        review = AgenticReview(g.paper_id, g.system_id, g.run_id, g.agentic)
        dump_json(agentic_sheet_to_dict(review), root / f"{base}.agentic.json")
        dump_json(graph_to_dict(g), root / f"{base}.graph.json")
        entry = {"paper_id": g.paper_id, "system_id": g.system_id, "run_id": g.run_id,
                 "graph": f"{base}.graph.json", "agentic_sheet": f"{base}.agentic.json"}
        if g.key in gates:
            dump_json(gates[g.key], root / f"{base}.gate.json")
            entry["gate"] = f"{base}.gate.json"
        manifest["graphs"].append(entry)
    manifest["systems"] = [{"system_id": s, "model_id": model, "runs": r} for s, r in runs.items()]
    dump_json(manifest, root / "manifest.json")
    return root / "manifest.json"
