import random
from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from concern_align.concerns import AcTreatment, Verdict
from concern_align.fixtures import random_graph
from concern_align.graph import InclusionPolicy
from concern_align.metrics import (
    LadderConfig,
    MetricDomainError,
    VerdictSource,
    aggregate_system,
    attention_gap,
    binary_accuracy,
    concern_recall,
    decisive_precision_strict,
    decompose_relevant_harmful,
    excused_flags,
    false_decisive_rate,
    harmful_phantom_rate,
    metric_at_k,
    phantom_decisive_rate,
    phantom_rate,
    rank_agentic,
    recall_by_treatment,
    resolved_escalation_rate,
    stratified_accuracy,
    summarize_runs,
    top_k_restrict,
    treatment_recall,
)
from concern_align.verdict import InferredValue, InferredVerdict
from helpers import T, ac, edge, graph, oc
import oracle

CFG = LadderConfig()


# -- worked accepted-paper example ----------------------------------------------------


def test_worked_ladder(worked):
    fb = false_decisive_rate([worked])
    assert (fb.total_agentic, fb.decisive_flags, fb.excused) == (6, 3, 1)
    assert fb.fdr == pytest.approx(1 / 3, abs=0)
    assert excused_flags(worked) == ["A1"]
    assert concern_recall(worked) == 4 / 6
    assert phantom_rate(worked) == 2 / 6
    assert harmful_phantom_rate(worked) == 1 / 6
    assert worked.unmatched_agentic == ("A5", "A6")
    assert resolved_escalation_rate([worked]) == 1.0
    d = decompose_relevant_harmful(worked)
    assert set(d.harmful) == {"A2", "A6"} and set(d.relevant) == {"A4", "A5"}
    assert d.harmful_components["reescalation"] == 1 and d.harmful_components["harmful_phantom"] == 1


def test_related_only_does_not_excuse(worked):
    edges = tuple(replace(e, match_type=type(e.match_type)("related")) if e.agentic_id == "A1" else e
                  for e in worked.edges)
    g = graph(worked.official, worked.agentic, edges)
    assert false_decisive_rate([g]).excused == 0


# -- verdict accuracy -----------------------------------------------------------------------------


def test_binary_accuracy_examples():
    assert binary_accuracy([("reject", "reject"), ("reject", "accept")]) == 0.5
    assert binary_accuracy([("accept", "accept")] * 3) == 1.0
    assert binary_accuracy([]) is None
    assert binary_accuracy([("ambiguous", "reject")]) == 0.0


def test_all_reject_predictor():
    pairs = [(Verdict.REJECT, Verdict.ACCEPT)] * 24 + [(Verdict.REJECT, Verdict.REJECT)] * 24
    sa = stratified_accuracy(pairs)
    assert (sa.accepted, sa.rejected, sa.overall) == (0.0, 1.0, 0.5)


@given(st.lists(st.tuples(st.sampled_from(["accept", "reject"]), st.sampled_from(["accept", "reject"])), min_size=1))
def test_stratification_consistency(pairs):
    sa = stratified_accuracy(pairs)
    weighted = sum(x * n for x, n in ((sa.accepted, sa.n_accepted), (sa.rejected, sa.n_rejected)) if x is not None)
    assert sa.overall == pytest.approx(weighted / len(pairs), abs=1e-12)


# -- coverage -------------------------------------------------------------------------------


def test_recall_sixteen_six():
    official = [oc(f"O{i}", "major") for i in range(1, 17)]
    agentic = [ac(f"A{i}", "major") for i in range(1, 7)]
    g = graph(official, agentic, [(f"O{i}", f"A{i}") for i in range(1, 7)], verdict="reject")
    assert concern_recall(g) == 0.375


def test_recall_and_phantom_edges_cases():
    off = [oc("O1", "major"), oc("O2", "minor")]
    ag = [ac("A1", "major"), ac("A2", "minor")]
    assert concern_recall(graph(off, ag)) == 0.0
    assert phantom_rate(graph(off, ag)) == 1.0
    full = graph(off, ag, [("O1", "A1"), ("O2", "A2", "partial")])
    assert concern_recall(full) == 1.0 and phantom_rate(full) == 0.0
    assert concern_recall(graph([], ag)) is None and phantom_rate(graph(off, [])) is None
    related = graph(off, ag, [("O1", "A1", "related")])
    assert phantom_rate(related) == 1.0


def test_harmful_phantom_cases():
    ag = [ac("A1", "minor"), ac("A2", "moderate")]
    assert harmful_phantom_rate(graph([oc("O1", "major")], ag)) == 0.0
    with pytest.raises(MetricDomainError):
        harmful_phantom_rate(graph([oc("O1", "major")], ag, verdict="reject"))


# -- decisive flags and escalation -----------------------------------------------------------------------------------


def test_fdr_no_flags_and_domain():
    g = graph([oc("O1", "major")], [ac("A1", "major")])
    assert false_decisive_rate([g]).fdr == 0.0
    with pytest.raises(MetricDomainError):
        false_decisive_rate([graph([oc("O1", "major")], [ac("A1", "major")], verdict="reject")])


def _rejected_mixed():
    # three flags, one matching a blocker; two unmatched decisive of ten concerns
    official = [oc("O1", "fatal", T.DECISIVE_BLOCKER), oc("O2", "major", T.UNRESOLVED)]
    agentic = [ac("A1", "fatal", True), ac("A2", "major", True), ac("A3", "fatal", True)] + [
        ac(f"A{i}", "minor") for i in range(4, 11)
    ]
    return graph(official, agentic, [("O1", "A1"), ("O2", "A4")], verdict="reject")


def test_decisive_precision_and_phantom_decisive():
    g = _rejected_mixed()
    assert decisive_precision_strict([g]) == 1 / 3
    assert phantom_decisive_rate([g]) == 0.2
    none = graph([oc("O1", "fatal", T.DECISIVE_BLOCKER)], [ac("A1", "fatal")], [("O1", "A1")], verdict="reject")
    assert decisive_precision_strict([none]) is None
    assert phantom_decisive_rate([none]) == 0.0
    allp = graph([oc("O1", "fatal", T.DECISIVE_BLOCKER)], [ac("A1", "fatal", True), ac("A2", "minor", True)],
                 verdict="reject")
    assert phantom_decisive_rate([allp]) == 1.0
    hit = graph([oc("O1", "fatal", T.DECISIVE_BLOCKER)], [ac("A1", "fatal", True)], [("O1", "A1")], verdict="reject")
    assert decisive_precision_strict([hit]) == 1.0


def test_resolved_escalation_examples():
    official = [oc("O1", "moderate", T.RESOLVED, pdf=True), oc("O2", "minor", T.RESOLVED, pdf=True),
                oc("O3", "major", T.RESOLVED, pdf=False)]
    agentic = [ac("A1", "major"), ac("A2", "moderate"), ac("A3", "fatal")]
    g = graph(official, agentic, [("O1", "A1"), ("O2", "A2", "partial"), ("O3", "A3")])
    assert resolved_escalation_rate([g]) == 0.5
    only_unfixed = graph(official, agentic, [("O3", "A3")])
    assert resolved_escalation_rate([only_unfixed]) is None


def test_decomposition_examples():
    acc = graph([oc("O1", "moderate")], [ac("A1", "fatal")] + [ac(f"A{i}", "moderate") for i in range(2, 7)])
    d = decompose_relevant_harmful(acc)
    assert d.harmful_rate == 1 / 6 and d.harmful_components["harmful_phantom"] == 1
    rej = graph([oc("O1", "major"), oc("O2", "fatal", T.DECISIVE_BLOCKER)], [ac("A1", "moderate"), ac("A2", "fatal")],
                [("O1", "A1"), ("O2", "A2")], verdict="reject")
    assert decompose_relevant_harmful(rej).harmful_rate == 0
    dismissed = graph([oc("O1", "minor", T.DISMISSED)], [ac("A1", "fatal")], [("O1", "A1")])
    assert decompose_relevant_harmful(dismissed).harmful_components["reescalation"] == 1


def test_decomposition_underrate_and_missed_blocker():
    g = graph([oc("O1", "fatal", T.DECISIVE_BLOCKER), oc("O2", "fatal", T.DECISIVE_BLOCKER)],
              [ac("A1", "minor")], [("O1", "A1")], verdict="reject")
    d = decompose_relevant_harmful(g)
    assert d.harmful == ("A1",) and d.harmful_components["severity_underrate"] == 1
    assert d.missed_blockers == 1


# -- recall by treatment ------------------------------------------------------------------------------------


def test_treatment_recall_examples():
    g = graph([oc("O1", "fatal", T.DECISIVE_BLOCKER), oc("O2", "major", T.DECISIVE_BLOCKER)],
              [ac("A1", "fatal")], [("O1", "A1")], verdict="reject")
    assert treatment_recall(g, AcTreatment.DECISIVE_BLOCKER) == 0.5
    assert treatment_recall(g, AcTreatment.RESOLVED) is None
    assert recall_by_treatment([g])[AcTreatment.RESOLVED] is None


@pytest.mark.parametrize("dec, res, gap", [(0.68, 0.48, 20.0), (0.24, 0.33, -9.0), (0.5, 0.5, 0.0)])
def test_attention_gap(dec, res, gap):
    got = attention_gap({AcTreatment.DECISIVE_BLOCKER: dec, AcTreatment.RESOLVED: res})
    assert got == pytest.approx(gap, abs=1e-9)


def test_attention_gap_undefined():
    assert attention_gap({AcTreatment.DECISIVE_BLOCKER: 0.5, AcTreatment.RESOLVED: None}) is None


def _recall_fixture(blockers, blocker_hits, resolved, resolved_hits):
    official, edges, agentic = [], [], []
    for i in range(blockers + resolved):
        t = T.DECISIVE_BLOCKER if i < blockers else T.RESOLVED
        pdf = None if t is T.DECISIVE_BLOCKER else True
        official.append(oc(f"O{i + 1}", "major", t, pdf=pdf))
        hit = i < blocker_hits if i < blockers else i - blockers < resolved_hits
        if hit:
            agentic.append(ac(f"A{len(agentic) + 1}", "major"))
            edges.append((f"O{i + 1}", agentic[-1].id))
    return graph(official, agentic, edges, verdict="reject")


def test_gap_from_recall_fixture():
    g = _recall_fixture(25, 17, 25, 12)
    profile = recall_by_treatment([g])
    assert profile[AcTreatment.DECISIVE_BLOCKER] == 0.68 and profile[AcTreatment.RESOLVED] == 0.48
    assert attention_gap(profile) == pytest.approx(20.0, abs=1e-9)


# -- top-K ---------------------------------------------------------------------------------------


def test_top_k_ordering_example():
    agentic = [ac("A1", "minor"), ac("A2", "major", True), ac("A3", "fatal"), ac("A4", "minor"),
               ac("A5", "major", True), ac("A6", "fatal")]
    g = graph([oc("O1", "major")], agentic)
    assert {a.id for a in top_k_restrict(g, 3).agentic} == {"A3", "A6", "A2"}


def test_top_k_decisive_tie_break():
    agentic = [ac("A1", "minor"), ac("A2", "minor"), ac("A3", "minor", True)]
    g = graph([oc("O1", "major")], agentic)
    assert [a.id for a in top_k_restrict(g, 1).agentic] == ["A3"]


def test_top_k_bound_and_bad_k(worked):
    assert top_k_restrict(worked, 6) == worked and top_k_restrict(worked, 99) == worked
    with pytest.raises(ValueError):
        top_k_restrict(worked, 0)


def test_unknown_severity_ranks_last():
    g = graph([oc("O1", "major")], [ac("A1", "unknown", True), ac("A2", "minor")])
    assert [a.id for a in rank_agentic(g.agentic)] == ["A2", "A1"]


def _rng_graphs(seed, n, verdict=None):
    rng = random.Random(seed)
    return [replace(random_graph(rng, verdict=verdict), paper_id=f"P{i}") for i in range(n)]


seeds = st.integers(min_value=0, max_value=2**32)


@settings(max_examples=60)
@given(seeds)
def test_top_k_identity_at_bound(seed):
    acc = _rng_graphs(seed, 5, Verdict.ACCEPT)
    rej = _rng_graphs(seed + 1, 5, Verdict.REJECT)
    bound = max(len(g.agentic) for g in acc + rej) or 1
    assert metric_at_k("false_decisive_rate", acc, bound) == false_decisive_rate(acc).fdr
    assert metric_at_k("decisive_recall", rej, bound) == metric_at_k("decisive_recall", rej, bound + 3)


@settings(max_examples=60)
@given(seeds)
def test_decisive_recall_at_k_non_decreasing(seed):
    rej = _rng_graphs(seed, 6, Verdict.REJECT)
    vals = [metric_at_k("decisive_recall", rej, k) for k in range(1, 10)]
    defined = [v for v in vals if v is not None]
    assert len(defined) in (0, len(vals))
    assert defined == sorted(defined)


@settings(max_examples=100)
@given(seeds)
def test_top_k_matches_selection_oracle(seed):
    (g,) = _rng_graphs(seed, 1)
    for k in range(1, 10):
        assert {a.id for a in top_k_restrict(g, k).agentic} == oracle.top_k_ids(g.agentic, k)


@settings(max_examples=40)
@given(seeds)
def test_selection_oracle_matches_exhaustive(seed):
    rng = random.Random(seed)
    g = random_graph(rng, max_concerns=5)
    for k in range(1, 6):
        assert oracle.top_k_ids(g.agentic, k) == oracle.top_k_ids_exhaustive(g.agentic, k)


@settings(max_examples=100)
@given(seeds, st.sampled_from(list(InclusionPolicy)))
def test_fdr_bound(seed, inc):
    acc = _rng_graphs(seed, 4, Verdict.ACCEPT)
    fb = false_decisive_rate(acc, LadderConfig(inclusion=inc))
    assert 0 <= fb.excused <= fb.decisive_flags
    if fb.fdr is not None:
        assert 0 <= fb.fdr <= fb.decisive_flags / fb.total_agentic


# -- aggregation -------------------------------------------------------------------------------


def test_summarize_runs():
    cell = summarize_runs([0.42, 0.44, 0.46])
    assert cell.mean == pytest.approx(0.44, abs=1e-12)
    assert summarize_runs([0.3]).std == 0.0
    assert summarize_runs([0.3, None]).mean is None


def test_aggregate_single_run_std_zero(worked):
    rep = aggregate_system("sys1", "m", ["r1"], ["P1"], {worked.key: worked})
    defined = [c for c in rep.cells.values() if c.defined]
    assert defined and all(c.std == 0.0 for c in defined)
    assert rep.cell("false_decisive_rate").mean == pytest.approx(1 / 3, abs=0)


def test_aggregate_missing_graph_marks_run_undefined(worked):
    rep = aggregate_system("sys1", "m", ["r1", "r2"], ["P1"], {worked.key: worked})
    assert rep.missing == (("P1", "r2"),)
    assert all(v is None for v in rep.per_run["r2"].values())
    assert not rep.cell("recall_accepted").defined


def test_aggregate_recall_mean_across_runs():
    graphs = {}
    # per-run recalls .42, .44, .46 on one rejected paper with 50 official concerns
    for run, hits in (("r1", 21), ("r2", 22), ("r3", 23)):
        official = [oc(f"O{i}", "major") for i in range(1, 51)]
        agentic = [ac(f"A{i}", "major") for i in range(1, hits + 1)]
        g = graph(official, agentic, [(f"O{i}", f"A{i}") for i in range(1, hits + 1)], verdict="reject", run_id=run)
        graphs[g.key] = g
    rep = aggregate_system("sys1", "m", ["r1", "r2", "r3"], ["P1"], graphs)
    assert rep.cell("recall_rejected").runs == (0.42, 0.44, 0.46)
    assert rep.cell("recall_rejected").mean == pytest.approx(0.44, abs=1e-12)


def test_concern_metrics_ignore_verdict_source(worked):
    preds_a = {worked.key: InferredVerdict(InferredValue.ACCEPT, VerdictSource.NATIVE)}
    preds_b = {worked.key: InferredVerdict(InferredValue.REJECT, VerdictSource.GATE)}
    a = aggregate_system("sys1", "m", ["r1"], ["P1"], {worked.key: worked}, preds_a)
    b = aggregate_system("sys1", "m", ["r1"], ["P1"], {worked.key: worked}, preds_b)
    diff = {k for k in a.per_run["r1"] if a.per_run["r1"][k] != b.per_run["r1"][k]}
    assert diff == {"accuracy_overall", "accuracy_accepted"}


def test_oracle_on_fig1(worked):
    assert oracle.fdr([worked]) == Fraction(1, 3)
    assert oracle.recall(worked) == Fraction(2, 3)
    assert oracle.harmful_phantom(worked) == Fraction(1, 6)
    rel, harm, missed = oracle.decomposition(worked)
    assert set(harm) == {"A2", "A6"} and set(rel) == {"A4", "A5"} and missed == 0
