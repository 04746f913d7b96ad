"""Evaluation-ladder metrics over match graphs.

Recall and phantom rates are computed per paper and then averaged over the
papers in a stratum.  FDR, decisive precision, phantom decisive rate and
resolved escalation pool the concern (or edge) multiset across papers.
Undefined values are ``None`` and are never folded in as zero.
"""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from .concerns import AcTreatment, AgenticConcern, Severity, Verdict, concern_sort_key
from .graph import (
    InclusionPolicy,
    MatchGraph,
    SeverityAlignment,
    SeverityPolicy,
    derive_unmatched,
    severity_alignment,
    strict_edge_set,
)

DEFAULT_K_VALUES = (3, 5, 7, 10, 15)


class MetricDomainError(ValueError):
    """A metric was asked about papers outside the stratum it is defined on."""


class VerdictSource(str, Enum):
    NATIVE = "native"
    GATE = "gate"
    GATE_DEFAULT_REJECT = "gate_default_reject"


@dataclass(frozen=True)
class LadderConfig:
    severity_policy: SeverityPolicy = SeverityPolicy.HYBRID
    inclusion: InclusionPolicy = InclusionPolicy.STRICT_PARTIAL
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    predicted_verdict_source: VerdictSource = VerdictSource.GATE_DEFAULT_REJECT

    def __post_init__(self):
        ks = tuple(self.k_values)
        if any(not isinstance(k, int) or k <= 0 for k in ks):
            raise ValueError(f"k_values must be positive integers: {ks}")
        if list(ks) != sorted(set(ks)):
            raise ValueError(f"k_values must be sorted ascending and distinct: {ks}")
        object.__setattr__(self, "k_values", ks)


DEFAULT_CONFIG = LadderConfig()


def _ratio(num: float, den: float) -> float | None:
    return num / den if den else None


def _mean(values: Iterable[float | None]) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _matched_official(g: MatchGraph, inc: InclusionPolicy) -> set[str]:
    return {e.official_id for e in strict_edge_set(g, inc)}


def _matched_agentic(g: MatchGraph, inc: InclusionPolicy) -> set[str]:
    return {e.agentic_id for e in strict_edge_set(g, inc)}


def _require(graphs: Iterable[MatchGraph], verdict: Verdict, metric: str) -> list[MatchGraph]:
    graphs = list(graphs)
    for g in graphs:
        if g.official_verdict is not verdict:
            raise MetricDomainError(
                f"{metric} is defined on {verdict.value}ed papers only; "
                f"{g.paper_id} is {getattr(g.official_verdict, 'value', 'unlabelled')}"
            )
    return graphs


# -- verdict accuracy ------------------------------------------------------------------------


def binary_accuracy(pairs: Sequence[tuple[object, object]]) -> float | None:
    """Fraction of (predicted, official) pairs that agree; None for no pairs.

    An ``ambiguous`` prediction never equals an official verdict, so it
    counts as a disagreement.
    """
    if not pairs:
        return None
    return sum(1 for pred, off in pairs if _verdict_token(pred) == _verdict_token(off)) / len(pairs)


def _verdict_token(v: object) -> object:
    return getattr(v, "value", v)


@dataclass(frozen=True)
class StratifiedAccuracy:
    overall: float | None
    accepted: float | None
    rejected: float | None
    n_accepted: int
    n_rejected: int


def stratified_accuracy(pairs: Sequence[tuple[object, object]]) -> StratifiedAccuracy:
    acc = [p for p in pairs if _verdict_token(p[1]) == Verdict.ACCEPT.value]
    rej = [p for p in pairs if _verdict_token(p[1]) == Verdict.REJECT.value]
    return StratifiedAccuracy(
        overall=binary_accuracy(pairs),
        accepted=binary_accuracy(acc),
        rejected=binary_accuracy(rej),
        n_accepted=len(acc),
        n_rejected=len(rej),
    )


# -- coverage --------------------------------------------------------------------------


def concern_recall(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    if not g.official:
        return None
    return len(_matched_official(g, cfg.inclusion)) / len(g.official)


def phantom_rate(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    if not g.agentic:
        return None
    matched = _matched_agentic(g, cfg.inclusion)
    return sum(1 for a in g.agentic if a.id not in matched) / len(g.agentic)


def harmful_phantom_rate(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    """Unmatched fatal/major agentic concerns on an accepted paper."""
    _require([g], Verdict.ACCEPT, "harmful phantom rate")
    if not g.agentic:
        return None
    matched = _matched_agentic(g, cfg.inclusion)
    return sum(1 for a in g.agentic if a.id not in matched and a.severity.is_high) / len(g.agentic)


# -- decisive flags --------------------------------------------------------------------------


@dataclass(frozen=True)
class FdrBreakdown:
    total_agentic: int
    decisive_flags: int
    excused: int
    excused_ids: tuple[tuple[str, str], ...] = ()

    @property
    def fdr(self) -> float | None:
        return _ratio(self.decisive_flags - self.excused, self.total_agentic)


def excused_flags(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> list[str]:
    """Decisive flags that strictly match a resolved concern whose fix is not in the PDF."""
    off = g.official_by_id()
    rebuttal_only = {e.agentic_id for e in strict_edge_set(g, cfg.inclusion) if off[e.official_id].rebuttal_only}
    return sorted((a.id for a in g.agentic if a.decisive and a.id in rebuttal_only), key=concern_sort_key)


def false_decisive_rate(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> FdrBreakdown:
    graphs = _require(graphs, Verdict.ACCEPT, "false decisive rate")
    total = flags = 0
    excused: list[tuple[str, str]] = []
    for g in graphs:
        total += len(g.agentic)
        flags += sum(1 for a in g.agentic if a.decisive)
        excused.extend((g.paper_id, aid) for aid in excused_flags(g, cfg))
    return FdrBreakdown(total_agentic=total, decisive_flags=flags, excused=len(excused), excused_ids=tuple(excused))


def decisive_precision_strict(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    graphs = _require(graphs, Verdict.REJECT, "decisive precision")
    flags = hits = 0
    for g in graphs:
        off = g.official_by_id()
        to_blocker = {
            e.agentic_id
            for e in strict_edge_set(g, cfg.inclusion)
            if off[e.official_id].treatment is AcTreatment.DECISIVE_BLOCKER
        }
        for a in g.agentic:
            if a.decisive:
                flags += 1
                hits += a.id in to_blocker
    return _ratio(hits, flags)


def phantom_decisive_rate(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    graphs = _require(graphs, Verdict.REJECT, "phantom decisive rate")
    total = count = 0
    for g in graphs:
        matched = _matched_agentic(g, cfg.inclusion)
        total += len(g.agentic)
        count += sum(1 for a in g.agentic if a.decisive and a.id not in matched)
    return _ratio(count, total)


def resolved_escalation_counts(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """(escalated, qualifying) strict edges onto PDF-fixed resolved concerns."""
    num = den = 0
    for g in graphs:
        off = g.official_by_id()
        ag = g.agentic_by_id()
        for e in strict_edge_set(g, cfg.inclusion):
            if off[e.official_id].pdf_fixed:
                den += 1
                num += ag[e.agentic_id].severity.is_high
    return num, den


def resolved_escalation_rate(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    return _ratio(*resolved_escalation_counts(graphs, cfg))


@dataclass(frozen=True)
class DecompositionResult:
    total_agentic: int
    relevant: tuple[str, ...]
    harmful: tuple[str, ...]
    harmful_components: Mapping[str, int]

    @property
    def relevant_rate(self) -> float | None:
        return _ratio(len(self.relevant), self.total_agentic)

    @property
    def harmful_rate(self) -> float | None:
        return _ratio(len(self.harmful), self.total_agentic)

    @property
    def missed_blockers(self) -> int:
        return self.harmful_components["missed_blocker"]


HARMFUL_COMPONENTS = ("reescalation", "harmful_phantom", "severity_underrate", "missed_blocker")


def decompose_relevant_harmful(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> DecompositionResult:
    """Split a paper's agentic concerns into decision-relevant and decision-harmful sets.

    Accepted papers: relevant means non-fatal/major feedback, matched or not;
    harmful is a fatal/major match to a dismissed or PDF-fixed resolved concern
    (re-escalation), or a fatal/major concern with no match.
    Rejected papers: relevant is a strict match whose severity agrees under the
    policy; harmful is a strict match rating a fatal/major official concern as
    moderate/minor with an ``under`` label.  Missed decisive blockers are
    official-side and counted apart from the harmful rate.
    """
    if g.official_verdict is None:
        raise MetricDomainError(f"{g.paper_id}: decomposition needs the official verdict")
    off = g.official_by_id()
    edges = strict_edge_set(g, cfg.inclusion)
    by_agentic: dict[str, list] = defaultdict(list)
    for e in edges:
        by_agentic[e.agentic_id].append(off[e.official_id])
    components = dict.fromkeys(HARMFUL_COMPONENTS, 0)
    relevant: list[str] = []
    harmful: list[str] = []

    for a in g.agentic:
        matches = by_agentic.get(a.id, [])
        if g.official_verdict is Verdict.ACCEPT:
            if not a.severity.is_high:
                relevant.append(a.id)
                continue
            if not matches:
                components["harmful_phantom"] += 1
                harmful.append(a.id)
            elif any(o.treatment is AcTreatment.DISMISSED or o.pdf_fixed for o in matches):
                components["reescalation"] += 1
                harmful.append(a.id)
        else:
            labels = [(o, severity_alignment(cfg.severity_policy, o.severity, a.severity)) for o in matches]
            if any(lab is SeverityAlignment.MATCH for _, lab in labels):
                relevant.append(a.id)
            if any(
                lab is SeverityAlignment.UNDER
                and o.severity.is_high
                and a.severity in (Severity.MODERATE, Severity.MINOR)
                for o, lab in labels
            ):
                components["severity_underrate"] += 1
                harmful.append(a.id)

    matched_o = {e.official_id for e in edges}
    components["missed_blocker"] = sum(
        1 for o in g.official if o.treatment is AcTreatment.DECISIVE_BLOCKER and o.id not in matched_o
    )
    return DecompositionResult(
        total_agentic=len(g.agentic),
        relevant=tuple(relevant),
        harmful=tuple(harmful),
        harmful_components=components,
    )


# -- recall by treatment ---------------------------------------------------------------------------


def treatment_recall(g: MatchGraph, treatment: AcTreatment, cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    pool = [o for o in g.official if o.treatment is treatment]
    if not pool:
        return None
    matched = _matched_official(g, cfg.inclusion)
    return sum(1 for o in pool if o.id in matched) / len(pool)


def recall_by_treatment(
    graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG
) -> dict[AcTreatment, float | None]:
    graphs = list(graphs)
    return {t: _mean(treatment_recall(g, t, cfg) for g in graphs) for t in AcTreatment}


def decisive_recall(graphs: Iterable[MatchGraph], cfg: LadderConfig = DEFAULT_CONFIG) -> float | None:
    return _mean(treatment_recall(g, AcTreatment.DECISIVE_BLOCKER, cfg) for g in graphs)


def attention_gap(profile: Mapping[AcTreatment, float | None]) -> float | None:
    """Decisive-blocker recall minus resolved recall, in percentage points."""
    dec = profile.get(AcTreatment.DECISIVE_BLOCKER)
    res = profile.get(AcTreatment.RESOLVED)
    if dec is None or res is None:
        return None
    return 100.0 * (dec - res)


# -- top-K -------------------------------------------------------------------------------


def _priority(a: AgenticConcern):
    rank = a.severity.rank
    return (-(rank if rank is not None else -1), not a.decisive, concern_sort_key(a.id))


def rank_agentic(concerns: Iterable[AgenticConcern]) -> list[AgenticConcern]:
    """Most severe first; decisive before non-decisive; then ascending id."""
    return sorted(concerns, key=_priority)


def top_k_restrict(g: MatchGraph, k: int) -> MatchGraph:
    if not isinstance(k, int) or k <= 0:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k >= len(g.agentic):
        return g
    keep = {a.id for a in rank_agentic(g.agentic)[:k]}
    agentic = tuple(a for a in g.agentic if a.id in keep)
    edges = tuple(e for e in g.edges if e.agentic_id in keep)
    uo, ua = derive_unmatched(g.official, agentic, edges)
    return replace(g, agentic=agentic, edges=edges, unmatched_official=uo, unmatched_agentic=ua)


def _fdr_value(graphs, cfg):
    return false_decisive_rate(graphs, cfg).fdr


def _macro(fn):
    return lambda graphs, cfg: _mean(fn(g, cfg) for g in graphs)


METRICS: dict[str, Callable[[list[MatchGraph], LadderConfig], float | None]] = {
    "concern_recall": _macro(concern_recall),
    "phantom_rate": _macro(phantom_rate),
    "false_decisive_rate": _fdr_value,
    "decisive_precision": decisive_precision_strict,
    "phantom_decisive_rate": phantom_decisive_rate,
    "resolved_escalation": resolved_escalation_rate,
    "decisive_recall": decisive_recall,
}


def metric_at_k(
    metric: str | Callable[[list[MatchGraph], LadderConfig], float | None],
    graphs: Iterable[MatchGraph],
    k: int,
    cfg: LadderConfig = DEFAULT_CONFIG,
):
    fn = METRICS[metric] if isinstance(metric, str) else metric
    return fn([top_k_restrict(g, k) for g in graphs], cfg)


# -- severity calibration ---------------------------------------------------------------


@dataclass(frozen=True)
class SeverityRates:
    edges: int
    match: float | None
    under: float | None
    over: float | None


def severity_rates(
    graphs: Iterable[MatchGraph],
    policy: SeverityPolicy,
    inc: InclusionPolicy = InclusionPolicy.STRICT_PARTIAL,
) -> SeverityRates:
    """match/under/over shares over strict edges, recomputed from raw severities.

    Edges touching an ``unknown`` severity and related edges are left out of
    the denominator.
    """
    counts = {SeverityAlignment.MATCH: 0, SeverityAlignment.UNDER: 0, SeverityAlignment.OVER: 0}
    for g in graphs:
        off = g.official_by_id()
        ag = g.agentic_by_id()
        for e in strict_edge_set(g, inc):
            if not e.match_type.is_strict:
                continue
            lab = severity_alignment(policy, off[e.official_id].severity, ag[e.agentic_id].severity)
            if lab in counts:
                counts[lab] += 1
    n = sum(counts.values())
    return SeverityRates(
        edges=n,
        match=_ratio(counts[SeverityAlignment.MATCH], n),
        under=_ratio(counts[SeverityAlignment.UNDER], n),
        over=_ratio(counts[SeverityAlignment.OVER], n),
    )


# -- system aggregation -------------------------------------------------------------------


RUN_METRICS = (
    "accuracy_overall",
    "accuracy_accepted",
    "accuracy_rejected",
    "recall_accepted",
    "recall_rejected",
    "decisive_recall_rejected",
    "false_decisive_rate",
    "resolved_escalation",
    "decisive_precision",
    "phantom_decisive_rate",
    "phantom_rate_accepted",
    "phantom_rate_rejected",
    "harmful_phantom_rate",
    "relevant_rate_accepted",
    "harmful_rate_accepted",
    "relevant_rate_rejected",
    "harmful_rate_rejected",
    "missed_blockers",
    "concerns_per_paper",
    "concerns_per_paper_accepted",
    "fatal_major_per_paper_accepted",
    "concerns_per_paper_rejected",
    "fatal_major_per_paper_rejected",
    "decisive_fraction_rejected",
) + tuple(f"recall_{t.value}" for t in AcTreatment) + ("attention_gap",)

# Identifiers that appear in reports; worksheets must never contain them.
METRIC_NAMES = tuple(sorted(set(RUN_METRICS) | set(METRICS) | {"fdr", "binary_accuracy", "harmful_phantom"}))


def at_k_name(metric: str, k: int) -> str:
    return f"{metric}@{k}"


def run_metrics(
    graphs: Sequence[MatchGraph],
    predictions: Mapping[str, object] | None,
    cfg: LadderConfig = DEFAULT_CONFIG,
) -> dict[str, float | None]:
    """All ladder values for one (system, run) over its papers.

    ``predictions`` maps paper_id to a predicted verdict (None when the
    configured source has no value for that paper); any missing prediction
    leaves the accuracy cells undefined.
    """
    acc = [g for g in graphs if g.official_verdict is Verdict.ACCEPT]
    rej = [g for g in graphs if g.official_verdict is Verdict.REJECT]
    out: dict[str, float | None] = {}

    preds = predictions or {}
    if graphs and all(preds.get(g.paper_id) is not None for g in graphs):
        sa = stratified_accuracy([(preds[g.paper_id], g.official_verdict) for g in graphs])
        out.update(accuracy_overall=sa.overall, accuracy_accepted=sa.accepted, accuracy_rejected=sa.rejected)
    else:
        out.update(accuracy_overall=None, accuracy_accepted=None, accuracy_rejected=None)

    out["recall_accepted"] = _mean(concern_recall(g, cfg) for g in acc)
    out["recall_rejected"] = _mean(concern_recall(g, cfg) for g in rej)
    out["decisive_recall_rejected"] = decisive_recall(rej, cfg)
    out["false_decisive_rate"] = false_decisive_rate(acc, cfg).fdr
    out["resolved_escalation"] = resolved_escalation_rate(acc, cfg)
    out["decisive_precision"] = decisive_precision_strict(rej, cfg)
    out["phantom_decisive_rate"] = phantom_decisive_rate(rej, cfg)
    out["phantom_rate_accepted"] = _mean(phantom_rate(g, cfg) for g in acc)
    out["phantom_rate_rejected"] = _mean(phantom_rate(g, cfg) for g in rej)
    out["harmful_phantom_rate"] = _mean(harmful_phantom_rate(g, cfg) for g in acc)

    decomp = {g.key: decompose_relevant_harmful(g, cfg) for g in graphs}
    for name, stratum in (("accepted", acc), ("rejected", rej)):
        out[f"relevant_rate_{name}"] = _mean(decomp[g.key].relevant_rate for g in stratum)
        out[f"harmful_rate_{name}"] = _mean(decomp[g.key].harmful_rate for g in stratum)
    out["missed_blockers"] = float(sum(d.missed_blockers for d in decomp.values())) if graphs else None

    out["concerns_per_paper"] = _mean(len(g.agentic) for g in graphs)
    for name, stratum in (("accepted", acc), ("rejected", rej)):
        out[f"concerns_per_paper_{name}"] = _mean(len(g.agentic) for g in stratum)
        out[f"fatal_major_per_paper_{name}"] = _mean(
            sum(1 for a in g.agentic if a.severity.is_high) for g in stratum
        )
    rej_total = sum(len(g.agentic) for g in rej)
    out["decisive_fraction_rejected"] = _ratio(sum(1 for g in rej for a in g.agentic if a.decisive), rej_total)

    profile = recall_by_treatment(rej, cfg)
    for t, v in profile.items():
        out[f"recall_{t.value}"] = v
    out["attention_gap"] = attention_gap(profile)

    for k in cfg.k_values:
        out[at_k_name("false_decisive_rate", k)] = metric_at_k("false_decisive_rate", acc, k, cfg)
        out[at_k_name("decisive_recall_rejected", k)] = metric_at_k("decisive_recall", rej, k, cfg)
    return out


@dataclass(frozen=True)
class Cell:
    """Cross-run summary of one metric: mean and sample std, or undefined."""

    mean: float | None
    std: float | None
    runs: tuple[float | None, ...]

    @property
    def defined(self) -> bool:
        return self.mean is not None


def summarize_runs(values: Sequence[float | None]) -> Cell:
    """Mean and sample std across runs; undefined if any run is undefined."""
    values = tuple(values)
    if not values or any(v is None for v in values):
        return Cell(None, None, values)
    mean = math.fsum(values) / len(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return Cell(mean, std, values)


@dataclass
class SystemReport:
    system_id: str
    model_id: str
    runs: tuple[str, ...]
    config: LadderConfig
    per_run: dict[str, dict[str, float | None]]
    per_paper: dict[str, dict[str, dict[str, float | None]]] = field(default_factory=dict)
    missing: tuple[tuple[str, str], ...] = ()
    cells: dict[str, Cell] = field(default_factory=dict)

    def cell(self, name: str) -> Cell:
        return self.cells[name]


def paper_metrics(g: MatchGraph, cfg: LadderConfig = DEFAULT_CONFIG) -> dict[str, float | None]:
    d = decompose_relevant_harmful(g, cfg)
    row = {
        "concern_recall": concern_recall(g, cfg),
        "phantom_rate": phantom_rate(g, cfg),
        "relevant_rate": d.relevant_rate,
        "harmful_rate": d.harmful_rate,
        "missed_blockers": float(d.missed_blockers),
        "concerns": float(len(g.agentic)),
    }
    if g.official_verdict is Verdict.ACCEPT:
        fb = false_decisive_rate([g], cfg)
        row["false_decisive_rate"] = fb.fdr
        row["harmful_phantom_rate"] = harmful_phantom_rate(g, cfg)
    else:
        row["decisive_recall"] = treatment_recall(g, AcTreatment.DECISIVE_BLOCKER, cfg)
    return row


def aggregate_system(
    system_id: str,
    model_id: str,
    runs: Sequence[str],
    papers: Sequence[str],
    graphs: Mapping[tuple[str, str, str], MatchGraph],
    predictions: Mapping[tuple[str, str, str], object] | None = None,
    cfg: LadderConfig = DEFAULT_CONFIG,
) -> SystemReport:
    """Per-run ladder values and their cross-run mean ± std for one system.

    A run that lacks a graph for any listed paper is reported with every
    value undefined rather than computed on a smaller paper set.
    """
    predictions = predictions or {}
    per_run: dict[str, dict[str, float | None]] = {}
    per_paper: dict[str, dict[str, dict[str, float | None]]] = {}
    missing: list[tuple[str, str]] = []
    for run in runs:
        keys = [(p, system_id, run) for p in papers]
        absent = [k for k in keys if k not in graphs]
        missing.extend((k[0], run) for k in absent)
        run_graphs = [graphs[k] for k in keys if k in graphs]
        per_paper[run] = {g.paper_id: paper_metrics(g, cfg) for g in run_graphs}
        if absent:
            template = run_metrics([], None, cfg)
            per_run[run] = dict.fromkeys(template, None)
            continue
        preds = {p: predictions.get((p, system_id, run)) for p in papers}
        per_run[run] = run_metrics(run_graphs, preds, cfg)
    names = list(run_metrics([], None, cfg))
    cells = {n: summarize_runs([per_run[r][n] for r in runs]) for n in names}
    return SystemReport(
        system_id=system_id,
        model_id=model_id,
        runs=tuple(runs),
        config=cfg,
        per_run=per_run,
        per_paper=per_paper,
        missing=tuple(missing),
        cells=cells,
    )
