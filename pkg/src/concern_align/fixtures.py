"""Seeded synthetic corpora and random graphs for exercising the metric ladder.

Every profile plants a behaviour the metrics should detect, and writes the
planted parameters to ``truth.json`` next to the manifest.  Output is
byte-identical for a given (profile, size, seed).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path

from .concerns import (
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
from .graph import (
    EDGE_CAP,
    JudgmentAlignment,
    MatchEdge,
    MatchGraph,
    MatchType,
    SeverityAlignment,
    SeverityPolicy,
    build_graph,
    dump_json,
    graph_to_dict,
)

PROFILES = ("reject_heavy", "dilution", "inverted_attention", "calibrated")

_TOPICS = (
    "ablation coverage", "baseline tuning", "dataset leakage", "proof of the main bound",
    "hyperparameter sensitivity", "related work positioning", "statistical significance",
    "scalability claims", "notation clarity", "reproducibility details", "threat model",
    "evaluation metric choice", "compute budget", "failure cases", "novelty over prior art",
)
_ASPECTS = ("is under-specified", "is not supported by the experiments", "needs a stronger argument",
            "is missing", "is inconsistent with the appendix", "is only partially addressed")
_HIGH = (Severity.FATAL, Severity.MAJOR)
_LOW = (Severity.MODERATE, Severity.MINOR)
_ALL = (Severity.FATAL, Severity.MAJOR, Severity.MODERATE, Severity.MINOR)
_GATES = ("G1_claim_evidence", "G2_baseline_fairness", "G4_validity", "G5_novelty")


@dataclass(frozen=True)
class Profile:
    accept_fraction: float
    official_range: tuple[int, int]
    blocker_match: float      # share of decisive blockers a run matches (rejected papers)
    resolved_match: float     # share of resolved concerns a run matches
    other_match: float
    phantoms: tuple[int, int]
    phantom_high: float       # chance a phantom is fatal/major
    padding: tuple[int, int]  # extra low-severity, non-decisive phantoms
    decisive_high: float      # chance a fatal/major agentic concern is flagged decisive
    native_reject: float | None  # None: native verdict follows the official one 80% of the time


_PROFILES = {
    "reject_heavy": Profile(0.5, (4, 8), 0.7, 0.5, 0.5, (1, 3), 0.7, (0, 1), 0.9, 0.9),
    "dilution": Profile(0.75, (4, 8), 0.6, 0.5, 0.5, (1, 2), 1.0, (6, 10), 1.0, None),
    "inverted_attention": Profile(0.25, (5, 8), 0.3, 0.8, 0.5, (1, 3), 0.4, (0, 2), 0.6, None),
    "calibrated": Profile(0.25, (5, 8), 0.9, 0.2, 0.5, (0, 2), 0.2, (0, 2), 0.5, None),
}


def _statement(rng: random.Random) -> str:
    return f"The {rng.choice(_TOPICS)} {rng.choice(_ASPECTS)}."


def _official_concerns(rng: random.Random, verdict: Verdict, p: Profile) -> tuple[OfficialConcern, ...]:
    n = rng.randint(*p.official_range)
    treatments: list[AcTreatment] = []
    if verdict is Verdict.REJECT:
        treatments += [AcTreatment.DECISIVE_BLOCKER, AcTreatment.RESOLVED]
    others = [t for t in AcTreatment if t is not AcTreatment.DECISIVE_BLOCKER or verdict is Verdict.REJECT]
    while len(treatments) < n:
        treatments.append(rng.choice(others))
    rng.shuffle(treatments)
    out = []
    for i, t in enumerate(treatments, start=1):
        severity = rng.choice(_HIGH) if t is AcTreatment.DECISIVE_BLOCKER else rng.choice(_ALL)
        pdf = PdfState.NOT_APPLICABLE
        if t is AcTreatment.RESOLVED:
            pdf = PdfState.ADDRESSED if rng.random() < 0.5 else PdfState.NOT_ADDRESSED
        out.append(
            OfficialConcern(
                id=f"O{i}",
                statement=_statement(rng),
                severity=severity,
                treatment=t,
                decisive=t is AcTreatment.DECISIVE_BLOCKER,
                addressed_in_pdf=pdf,
                evidence_quotes=(f"Reviewer {rng.randint(1, 4)}: {_statement(rng)}",),
            )
        )
    return tuple(out)


def _matched_count(n: int, share: float, high: bool) -> int:
    # round toward the planted side so the ordering between shares survives small n
    return min(n, math.ceil(share * n - 1e-9)) if high else math.floor(share * n + 1e-9)


def _perturb(rng: random.Random, s: Severity) -> Severity:
    if rng.random() < 0.05:
        return Severity.UNKNOWN
    rank = {Severity.FATAL: 3, Severity.MAJOR: 2, Severity.MODERATE: 1, Severity.MINOR: 0}[s]
    rank = max(0, min(3, rank + rng.choice((-2, -1, 0, 0, 0, 1, 1))))
    return _ALL[3 - rank]


def _run(
    rng: random.Random, paper: PaperRecord, system_id: str, run_id: str, p: Profile
) -> tuple[AgenticReview, list[MatchEdge], dict]:
    by_t: dict[AcTreatment, list[OfficialConcern]] = {}
    for c in paper.official_concerns:
        by_t.setdefault(c.treatment, []).append(c)
    high_blocker = p.blocker_match >= p.resolved_match
    matched: list[OfficialConcern] = []
    for t, group in sorted(by_t.items(), key=lambda kv: kv[0].value):
        if t is AcTreatment.DECISIVE_BLOCKER:
            k = _matched_count(len(group), p.blocker_match, high_blocker)
        elif t is AcTreatment.RESOLVED:
            k = _matched_count(len(group), p.resolved_match, not high_blocker)
        else:
            k = sum(1 for _ in group if rng.random() < p.other_match)
        matched += rng.sample(group, k)

    drafts: list[dict] = []
    for o in matched:
        drafts.append({"severity": _perturb(rng, o.severity), "official": o.id,
                       "type": rng.choice((MatchType.EXACT, MatchType.PARTIAL))})
    for _ in range(rng.randint(*p.phantoms)):
        drafts.append({"severity": rng.choice(_HIGH) if rng.random() < p.phantom_high else rng.choice(_LOW)})
    for _ in range(rng.randint(*p.padding)):
        drafts.append({"severity": Severity.MINOR, "padding": True})
    rng.shuffle(drafts)

    concerns = []
    edges: list[MatchEdge] = []
    for i, d in enumerate(drafts, start=1):
        aid = f"A{i}"
        decisive = d["severity"].is_high and not d.get("padding") and rng.random() < p.decisive_high
        concerns.append(AgenticConcern(id=aid, statement=_statement(rng), severity=d["severity"], decisive=decisive))
        if "official" in d:
            edges.append(MatchEdge(d["official"], aid, d["type"], SeverityAlignment.NOT_APPLICABLE,
                                   rng.choice((JudgmentAlignment.ALIGNED, JudgmentAlignment.ALIGNED,
                                               JudgmentAlignment.INVERTED))))

    # a few related edges for context, respecting the per-concern cap
    used: dict[str, int] = {}
    for e in edges:
        used[e.official_id] = used.get(e.official_id, 0) + 1
        used[e.agentic_id] = used.get(e.agentic_id, 0) + 1
    pairs = {e.key for e in edges}
    for _ in range(rng.randint(0, 2) if concerns else 0):
        o = rng.choice(paper.official_concerns).id
        a = rng.choice(concerns).id
        if (o, a) in pairs or used.get(o, 0) >= EDGE_CAP or used.get(a, 0) >= EDGE_CAP:
            continue
        pairs.add((o, a))
        used[o] = used.get(o, 0) + 1
        used[a] = used.get(a, 0) + 1
        edges.append(MatchEdge(o, a, MatchType.RELATED, SeverityAlignment.NOT_APPLICABLE,
                               JudgmentAlignment.NOT_APPLICABLE))

    if p.native_reject is not None:
        native = Verdict.REJECT if rng.random() < p.native_reject else Verdict.ACCEPT
    else:
        flip = rng.random() >= 0.8
        native = paper.official_verdict
        if flip:
            native = Verdict.ACCEPT if native is Verdict.REJECT else Verdict.REJECT
    review = AgenticReview(paper.paper_id, system_id, run_id, tuple(concerns), native_verdict=native)
    gate = {
        "positive_acceptance_signal": rng.random() < 0.5,
        "gates": [
            {"agentic_id": c.id, "gate_code": rng.choice(_GATES)}
            for c in concerns
            if c.severity.is_high and rng.random() < 0.6
        ],
    }
    return review, edges, gate


def generate_fixture_corpus(
    profile: str,
    size: int,
    seed: int,
    out_dir: Path | str,
    *,
    systems: int = 1,
    runs: int = 3,
) -> Path:
    """Write a corpus of ``size`` papers and return the manifest path."""
    if profile not in _PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    if size < 1:
        raise ValueError("size must be >= 1")
    p = _PROFILES[profile]
    rng = random.Random(f"{profile}:{size}:{seed}")
    out = Path(out_dir)

    n_accept = round(p.accept_fraction * size)
    if size >= 2:
        n_accept = min(max(n_accept, 1), size - 1)
    verdicts = [Verdict.ACCEPT] * n_accept + [Verdict.REJECT] * (size - n_accept)
    rng.shuffle(verdicts)
    width = max(2, len(str(size)))
    papers = []
    for i, v in enumerate(verdicts, start=1):
        pid = f"P{i:0{width}d}"
        papers.append(PaperRecord(pid, v, "synthetic", rng.random() < 0.5, _official_concerns(rng, v, p)))

    system_ids = [f"sys{j + 1}" for j in range(systems)]
    run_ids = [f"r{j + 1}" for j in range(runs)]
    manifest = {
        "papers": [],
        "systems": [{"system_id": s, "model_id": f"synthetic-{s}", "runs": run_ids} for s in system_ids],
        "graphs": [],
    }
    for paper in papers:
        rel = f"papers/{paper.paper_id}.json"
        dump_json(official_sheet_to_dict(paper), out / rel)
        manifest["papers"].append({"paper_id": paper.paper_id, "official_sheet": rel})
    for s in system_ids:
        for r in run_ids:
            for paper in papers:
                review, edges, gate = _run(rng, paper, s, r, p)
                g = build_graph(paper, review, edges, SeverityPolicy.HYBRID)
                base = f"runs/{s}/{r}/{paper.paper_id}"
                dump_json(agentic_sheet_to_dict(review), out / f"{base}.agentic.json")
                dump_json(graph_to_dict(g), out / f"{base}.graph.json")
                dump_json(gate, out / f"{base}.gate.json")
                manifest["graphs"].append({
                    "paper_id": paper.paper_id, "system_id": s, "run_id": r,
                    "graph": f"{base}.graph.json", "agentic_sheet": f"{base}.agentic.json",
                    "gate": f"{base}.gate.json",
                })
    truth = {
        "profile": profile,
        "seed": seed,
        "size": size,
        "systems": system_ids,
        "runs": run_ids,
        "planted": {k: list(v) if isinstance(v, tuple) else v for k, v in vars(p).items()},
        "official_verdicts": {paper.paper_id: paper.official_verdict.value for paper in papers},
    }
    dump_json(truth, out / "truth.json")
    path = out / "manifest.json"
    dump_json(manifest, path)
    return path


# -- in-memory random graphs ---------------------------------------------------------


def random_graph(
    rng: random.Random,
    *,
    max_concerns: int = 8,
    verdict: Verdict | None = None,
    policy: SeverityPolicy = SeverityPolicy.HYBRID,
) -> MatchGraph:
    """A lint-clean graph with arbitrary structure; sides may be empty."""
    verdict = verdict or rng.choice((Verdict.ACCEPT, Verdict.REJECT))
    official = []
    for i in range(1, rng.randint(0, max_concerns) + 1):
        choices = [t for t in AcTreatment if verdict is Verdict.REJECT or t is not AcTreatment.DECISIVE_BLOCKER]
        t = rng.choice(choices)
        pdf = PdfState.NOT_APPLICABLE
        if t is AcTreatment.RESOLVED:
            pdf = rng.choice((PdfState.ADDRESSED, PdfState.NOT_ADDRESSED))
        official.append(OfficialConcern(f"O{i}", "o", rng.choice(_ALL), t, t is AcTreatment.DECISIVE_BLOCKER, pdf))
    agentic = [
        AgenticConcern(f"A{i}", "a", rng.choice(_ALL + (Severity.UNKNOWN,)), rng.random() < 0.4)
        for i in range(1, rng.randint(0, max_concerns) + 1)
    ]
    edges: list[MatchEdge] = []
    used: dict[str, int] = {}
    pairs = [(o.id, a.id) for o in official for a in agentic]
    rng.shuffle(pairs)
    for o, a in pairs[: rng.randint(0, len(pairs))]:
        if used.get(o, 0) >= EDGE_CAP or used.get(a, 0) >= EDGE_CAP:
            continue
        used[o] = used.get(o, 0) + 1
        used[a] = used.get(a, 0) + 1
        mt = rng.choice(tuple(MatchType))
        ja = rng.choice((JudgmentAlignment.ALIGNED, JudgmentAlignment.INVERTED, JudgmentAlignment.MIXED)) if mt.is_strict else JudgmentAlignment.NOT_APPLICABLE
        edges.append(MatchEdge(o, a, mt, SeverityAlignment.NOT_APPLICABLE, ja))
    paper = PaperRecord("P", verdict, "synthetic", False, tuple(official))
    review = AgenticReview("P", "sys", "r1", tuple(agentic))
    return build_graph(paper, review, edges, policy)
