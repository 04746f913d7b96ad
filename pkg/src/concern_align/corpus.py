"""Load a whole corpus from its manifest, keeping per-entry failures isolated."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .concerns import (
    AgenticReview,
    CorpusManifest,
    PaperRecord,
    SchemaError,
    load_agentic_sheet,
    load_manifest,
    load_official_sheet,
)
from .graph import Diagnostic, MatchGraph, SeverityPolicy, has_errors, lint_graph, parse_graph, relabel_alignments
from .metrics import LadderConfig, VerdictSource
from .verdict import GateFile, InferredVerdict, parse_gate_file, predict_verdict

GraphKey = tuple[str, str, str]


@dataclass
class Corpus:
    manifest: CorpusManifest
    papers: dict[str, PaperRecord] = field(default_factory=dict)
    reviews: dict[GraphKey, AgenticReview] = field(default_factory=dict)
    graphs: dict[GraphKey, MatchGraph] = field(default_factory=dict)
    gates: dict[GraphKey, GateFile] = field(default_factory=dict)
    load_errors: list[Diagnostic] = field(default_factory=list)

    def system_model(self, system_id: str) -> str:
        for s in self.manifest.systems:
            if s.system_id == system_id:
                return s.model_id
        raise KeyError(system_id)


def _read_error(code: str, location: str, exc: Exception) -> Diagnostic:
    if isinstance(exc, OSError):
        msg = f"cannot read {exc.filename}: {exc.strerror}"
    else:
        msg = str(exc)
    return Diagnostic("error", code, location, msg)


def load_corpus(manifest_path: Path | str) -> Corpus:
    """Read every file the manifest names.

    A bad manifest raises; a bad sheet, graph or gate file becomes a
    LOAD_ERROR diagnostic for that entry and the rest still load.
    """
    corpus = Corpus(load_manifest(manifest_path, check_files=False))
    m = corpus.manifest
    for pid, path in sorted(m.papers.items()):
        try:
            paper = load_official_sheet(path)
            if paper.paper_id != pid:
                raise SchemaError(f"sheet is for paper {paper.paper_id}, manifest says {pid}", source=str(path))
            corpus.papers[pid] = paper
        except (OSError, SchemaError) as exc:
            corpus.load_errors.append(_read_error("LOAD_ERROR", f"{pid}/official_sheet", exc))

    for key in sorted(m.graph_index):
        ref = m.graph_index[key]
        where = "/".join(key)
        paper = corpus.papers.get(key[0])
        if paper is None:
            corpus.load_errors.append(
                Diagnostic("error", "LOAD_ERROR", where, f"official sheet for {key[0]} did not load")
            )
            continue
        try:
            review = load_agentic_sheet(ref.agentic_sheet)
            if (review.paper_id, review.system_id, review.run_id) != key:
                raise SchemaError("agentic sheet key does not match manifest entry", source=str(ref.agentic_sheet))
            graph = parse_graph(ref.graph.read_bytes(), paper, review, source=str(ref.graph))
            gate = parse_gate_file(ref.gate.read_bytes(), source=str(ref.gate)) if ref.gate else None
        except (OSError, SchemaError, ValueError) as exc:
            corpus.load_errors.append(_read_error("LOAD_ERROR", where, exc))
            continue
        corpus.reviews[key] = review
        corpus.graphs[key] = graph
        if gate is not None:
            corpus.gates[key] = gate
    return corpus


def lint_corpus(corpus: Corpus, policy: SeverityPolicy = SeverityPolicy.HYBRID) -> dict[GraphKey, list[Diagnostic]]:
    """Lint diagnostics per loaded graph, prefixed with the system and run."""
    out: dict[GraphKey, list[Diagnostic]] = {}
    for key, g in sorted(corpus.graphs.items()):
        out[key] = [
            Diagnostic(d.severity, d.code, f"{key[1]}/{key[2]}/{d.location}", d.message)
            for d in lint_graph(g, policy)
        ]
    return out


def usable_graphs(
    corpus: Corpus,
    cfg: LadderConfig,
    lint: dict[GraphKey, list[Diagnostic]] | None = None,
) -> dict[GraphKey, MatchGraph]:
    """Lint-clean graphs with severity labels recomputed under ``cfg``."""
    lint = lint if lint is not None else lint_corpus(corpus, cfg.severity_policy)
    return {
        key: relabel_alignments(g, cfg.severity_policy)
        for key, g in corpus.graphs.items()
        if not has_errors(lint.get(key, ()))
    }


def predictions(corpus: Corpus, source: VerdictSource) -> dict[GraphKey, InferredVerdict | None]:
    out: dict[GraphKey, InferredVerdict | None] = {}
    for key, review in sorted(corpus.reviews.items()):
        try:
            out[key] = predict_verdict(review, source, corpus.gates.get(key))
        except SchemaError:
            out[key] = None
    return out
