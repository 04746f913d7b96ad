"""Corpus-level sweeps built on the ladder: policy sensitivity and reliability stats."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .concerns import AcTreatment, Verdict
from .graph import InclusionPolicy, MatchGraph, SeverityPolicy, relabel_alignments
from .metrics import (
    LadderConfig,
    SeverityRates,
    concern_recall,
    decisive_recall,
    false_decisive_rate,
    phantom_rate,
    resolved_escalation_counts,
    severity_rates,
    treatment_recall,
)
from .stats import ConfidenceInterval, Statistic, bootstrap_ci, cohen_kappa, contingency, icc_2_1, run_matrix

GraphKey = tuple[str, str, str]


def _mean(values) -> float | None:
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


# -- policy sensitivity ----------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityResult:
    system_id: str
    recall: dict[tuple[SeverityPolicy, InclusionPolicy], float | None]
    decisive_recall: dict[tuple[SeverityPolicy, InclusionPolicy], float | None]
    severity: dict[SeverityPolicy, SeverityRates]


def sensitivity(system_id: str, graphs: Sequence[MatchGraph], cfg: LadderConfig) -> SensitivityResult:
    """3x3 recall grid and per-policy severity rates for one system, pooled over runs.

    Recall is the per-paper mean over every (paper, run) graph; decisive
    recall is over rejected papers only.
    """
    recall: dict = {}
    dec: dict = {}
    rates: dict = {}
    for sp in SeverityPolicy:
        relabelled = [relabel_alignments(g, sp) for g in graphs]
        rejected = [g for g in relabelled if g.official_verdict is Verdict.REJECT]
        rates[sp] = severity_rates(relabelled, sp, cfg.inclusion)
        for inc in InclusionPolicy:
            c = replace(cfg, severity_policy=sp, inclusion=inc)
            recall[(sp, inc)] = _mean(concern_recall(g, c) for g in relabelled)
            dec[(sp, inc)] = decisive_recall(rejected, c)
    return SensitivityResult(system_id, recall, dec, rates)


# -- reliability and uncertainty --------------------------------------------------------

ICC_METRICS = ("verdict", "recall", "phantom")
CI_METRICS = ("false_decisive_rate", "decisive_recall_rejected", "recall_rejected", "resolved_escalation")
VERDICT_CODE = {"accept": 1.0, "reject": 0.0}


@dataclass(frozen=True)
class IccRow:
    system_id: str
    metric: str
    icc: float | None
    kappa: float | None
    papers: int
    excluded: int
    agreement: float | None


@dataclass(frozen=True)
class CiRow:
    system_id: str
    run_id: str
    metric: str
    ci: ConfidenceInterval | None
    papers: int
    excluded: int
    statistic: Statistic


def _verdict_value(pred) -> float | None:
    """1 for accept, 0 for reject; ambiguous or missing predictions are undefined."""
    if pred is None:
        return None
    return VERDICT_CODE.get(getattr(pred.value, "value", pred.value))


def icc_rows(
    system_id: str,
    runs: Sequence[str],
    papers: Sequence[str],
    graphs: Mapping[GraphKey, MatchGraph],
    predictions: Mapping[GraphKey, object],
    cfg: LadderConfig,
) -> list[IccRow]:
    """ICC(2,1) with papers as subjects and runs as raters.

    A paper missing from any run, or undefined in any run, is dropped from
    that metric's matrix and counted. Verdict rows also carry the mean
    pairwise Cohen's kappa between runs.
    """
    per_metric: dict[str, dict[str, dict[str, float | None]]] = {m: {} for m in ICC_METRICS}
    for run in runs:
        for m in ICC_METRICS:
            per_metric[m][run] = {}
        for pid in papers:
            g = graphs.get((pid, system_id, run))
            per_metric["verdict"][run][pid] = _verdict_value(predictions.get((pid, system_id, run)))
            per_metric["recall"][run][pid] = concern_recall(g, cfg) if g else None
            per_metric["phantom"][run][pid] = phantom_rate(g, cfg) if g else None
    rows = []
    for m in ICC_METRICS:
        mat = run_matrix(per_metric[m])
        icc = kappa = agreement = None
        if len(runs) >= 2 and len(mat.paper_ids) >= 2:
            icc = icc_2_1(mat)
            agreement = float((mat.values == mat.values[:, :1]).all(axis=1).mean())
            if m == "verdict":
                kappa = _pairwise_kappa(mat)
        rows.append(IccRow(system_id, m, icc, kappa, len(mat.paper_ids), mat.dropped, agreement))
    return rows


def _pairwise_kappa(mat) -> float | None:
    values = []
    for i, j in itertools.combinations(range(mat.values.shape[1]), 2):
        pairs = [(int(a), int(b)) for a, b in zip(mat.values[:, i], mat.values[:, j])]
        values.append(cohen_kappa(contingency(pairs, (0, 1))))
    if not values or any(v is None for v in values):
        return None
    return sum(values) / len(values)


def _ci_population(metric: str, graphs: list[MatchGraph], cfg: LadderConfig) -> tuple[list, int, Statistic]:
    acc = [g for g in graphs if g.official_verdict is Verdict.ACCEPT]
    rej = [g for g in graphs if g.official_verdict is Verdict.REJECT]
    if metric == "false_decisive_rate":
        pop = []
        for g in acc:
            fb = false_decisive_rate([g], cfg)
            pop.append((fb.decisive_flags - fb.excused, fb.total_agentic))
        return pop, 0, Statistic.POOLED_RATIO
    if metric == "resolved_escalation":
        return [resolved_escalation_counts([g], cfg) for g in acc], 0, Statistic.POOLED_RATIO
    if metric == "recall_rejected":
        vals = [concern_recall(g, cfg) for g in rej]
    else:
        vals = [treatment_recall(g, AcTreatment.DECISIVE_BLOCKER, cfg) for g in rej]
    kept = [v for v in vals if v is not None]
    return kept, len(vals) - len(kept), Statistic.MEAN


def ci_rows(
    system_id: str,
    runs: Sequence[str],
    papers: Sequence[str],
    graphs: Mapping[GraphKey, MatchGraph],
    cfg: LadderConfig,
    resamples: int,
    seed: int,
) -> list[CiRow]:
    """Per-run percentile intervals, resampling papers within the metric's stratum."""
    rows = []
    for run in runs:
        run_graphs = [graphs[(p, system_id, run)] for p in papers if (p, system_id, run) in graphs]
        for metric in CI_METRICS:
            pop, excluded, stat = _ci_population(metric, run_graphs, cfg)
            ci = bootstrap_ci(pop, stat, resamples, seed) if len(pop) >= 2 else None
            rows.append(CiRow(system_id, run, metric, ci, len(pop), excluded, stat))
    return rows


def ci_range(rows: Sequence[CiRow], metric: str) -> tuple[float, float] | None:
    """Lowest lower bound and highest upper bound across runs, or None if any run is undefined."""
    picked = [r.ci for r in rows if r.metric == metric]
    if not picked or any(c is None for c in picked):
        return None
    return min(c.lower for c in picked), max(c.upper for c in picked)

