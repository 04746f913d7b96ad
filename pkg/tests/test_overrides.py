import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from concern_align.concerns import SchemaError
from concern_align.fixtures import random_graph
from concern_align.graph import MatchType, SeverityAlignment, lint_graph
from concern_align.overrides import (
    WORKSHEET_HEADERS,
    OverrideEntry,
    OverrideError,
    OverrideKind,
    apply_overrides,
    diff_graphs,
    generate_worksheet,
    isolation_violations,
    parse_overrides,
    redact,
)
from helpers import ac, graph, oc, paper_of

K = OverrideKind


def remove(o, a):
    return OverrideEntry(K.REMOVE, o, a, "not the same issue")


def insert(o, a, mt="exact", **kw):
    return OverrideEntry(K.INSERT, o, a, "missed match", new_match_type=MatchType(mt), **kw)


def test_remove_restores_unmatched(worked):
    g = apply_overrides(worked, [remove("O3", "A3")])
    assert "O3" in g.unmatched_official and "A3" in g.unmatched_agentic
    assert not lint_graph(g)


def test_insert_between_unmatched(worked):
    g = apply_overrides(worked, [insert("O6", "A6")])
    assert "O6" not in g.unmatched_official and "A6" not in g.unmatched_agentic
    # inserted labels are derived from the endpoint severities
    assert g.edge("O6", "A6").severity_alignment is SeverityAlignment.OVER


def test_empty_overrides_identity(worked):
    assert apply_overrides(worked, []) == worked


def test_remove_then_insert_round_trip(worked):
    e = worked.edge("O4", "A4")
    entries = [remove("O4", "A4"), insert("O4", "A4", "partial", new_judgment_alignment=e.judgment_alignment)]
    assert apply_overrides(worked, entries) == worked


def test_reclassify_partial_to_exact(worked):
    g = apply_overrides(worked, [OverrideEntry(K.RECLASSIFY, "O1", "A1", "scope", new_match_type=MatchType.EXACT)])
    d = diff_graphs(worked, g)
    assert len(d.relabeled) == 1 and not d.added and not d.removed


def test_reclassify_to_related_clears_severity(worked):
    g = apply_overrides(worked, [OverrideEntry(K.RECLASSIFY, "O3", "A3", "x", new_match_type=MatchType.RELATED)])
    assert g.edge("O3", "A3").severity_alignment is SeverityAlignment.NOT_APPLICABLE
    assert "O3" in g.unmatched_official


@pytest.mark.parametrize("entries, msg", [
    ([remove("O6", "A6")], "no such edge"),
    ([remove("O3", "A3"), remove("O3", "A3")], "no such edge"),
    ([insert("O3", "A3")], "already exists"),
    ([insert("O9", "A3")], "does not exist"),
    ([insert("O3", "A6"), insert("O3", "A5")], "cap"),
])
def test_override_errors_leave_input_untouched(worked, entries, msg):
    before = worked
    with pytest.raises(OverrideError, match=msg):
        apply_overrides(worked, entries)
    assert worked == before


def test_override_refuses_dirty_input(worked):
    dirty = replace(worked, unmatched_official=())
    with pytest.raises(OverrideError, match="fails lint"):
        apply_overrides(dirty, [remove("O3", "A3")])


def test_entry_validation_and_parsing():
    with pytest.raises(ValueError):
        OverrideEntry(K.INSERT, "O1", "A1")
    with pytest.raises(ValueError):
        OverrideEntry(K.RECLASSIFY, "O1", "A1")
    with pytest.raises(ValueError):
        OverrideEntry(K.REMOVE, "O1", "A1", new_match_type=MatchType.EXACT)
    parsed = parse_overrides('[{"kind": "insert", "official_id": "O1", "agentic_id": "A2", '
                             '"rationale": "r", "new_match_type": "partial"}]')
    assert parsed == [OverrideEntry(K.INSERT, "O1", "A2", "r", new_match_type=MatchType.PARTIAL)]
    with pytest.raises(SchemaError):
        parse_overrides('[{"kind": "insert", "official_id": "O1", "agentic_id": "A2", "rationale": "r"}]')
    with pytest.raises(SchemaError):
        parse_overrides('{"kind": "remove"}')


def test_diff_examples(worked):
    assert diff_graphs(worked, worked).is_empty
    d = diff_graphs(worked, apply_overrides(worked, [remove("O3", "A3")]))
    assert len(d.removed) == 1
    assert len(d.unmatched_official_added) + len(d.unmatched_agentic_added) == 2
    assert d.endpoints() == {"O3", "A3"}
    assert d.summary_lines()[0] == "P1/sys1/r1: -edge O3-A3 (exact)"


def test_diff_keys_must_agree(worked):
    with pytest.raises(ValueError):
        diff_graphs(worked, replace(worked, run_id="r2"))


# -- worksheets ---------------------------------------------------------------------------


def test_worked_worksheet_sections(worked):
    ws = generate_worksheet(worked, paper_of(worked))
    assert (len(ws.strict), len(ws.unmatched_official), len(ws.unmatched_agentic), len(ws.related)) == (4, 2, 2, 1)
    text = ws.render()
    for header in WORKSHEET_HEADERS:
        assert f"== {header} (" in text
    assert isolation_violations(text) == []


def test_empty_worksheet():
    ws = generate_worksheet(graph([], []))
    assert (ws.strict, ws.unmatched_official, ws.unmatched_agentic, ws.related) == ((), (), (), ())
    assert ws.render().count("(none)") == 4


def test_worksheet_redacts_leaky_text():
    g = graph([oc("O1", "major", statement="Reviewers recommend to REJECT; see the false decisive rate.")],
              [ac("A1", "major", statement="Scope inflation: should be accepted")], [("O1", "A1")])
    text = generate_worksheet(g).render()
    assert isolation_violations(text) == []
    assert "[redacted]" in text


def test_worksheet_refuses_lint_errors(worked):
    with pytest.raises(OverrideError):
        generate_worksheet(replace(worked, unmatched_agentic=()))


leaky = st.text(alphabet=st.sampled_from(list("acceptrejcted _-fdrsoEPTJ")), max_size=40)


@settings(max_examples=200)
@given(leaky)
def test_redact_removes_every_token(text):
    assert isolation_violations(redact(text)) == []


@settings(max_examples=100)
@given(st.integers(0, 2**32), leaky, leaky)
def test_worksheet_isolation_property(seed, o_text, a_text):
    rng = random.Random(seed)
    g = random_graph(rng)
    g = replace(g, official=tuple(replace(c, statement=o_text or "x") for c in g.official),
                agentic=tuple(replace(c, statement=a_text or "x") for c in g.agentic))
    assert isolation_violations(generate_worksheet(g).render()) == []


def _random_entries(rng, g):
    entries = []
    for _ in range(rng.randint(1, 4)):
        o = rng.choice(g.official).id if g.official and rng.random() < 0.95 else "O99"
        a = rng.choice(g.agentic).id if g.agentic else "A99"
        kind = rng.choice(list(K))
        if kind is K.REMOVE:
            entries.append(remove(o, a))
        elif kind is K.INSERT:
            entries.append(insert(o, a, rng.choice(["exact", "partial", "related"])))
        else:
            entries.append(OverrideEntry(K.RECLASSIFY, o, a, "r", new_match_type=rng.choice(list(MatchType))))
    return entries


@settings(max_examples=200)
@given(st.integers(0, 2**32))
def test_override_atomicity_lint_and_diff_endpoints(seed):
    rng = random.Random(seed)
    g = random_graph(rng)
    entries = _random_entries(rng, g)
    snapshot = g
    try:
        out = apply_overrides(g, entries)
    except OverrideError:
        assert g == snapshot
        return
    assert not [d for d in lint_graph(out) if d.is_error]
    named = {x for e in entries for x in (e.official_id, e.agentic_id)}
    ends = diff_graphs(g, out).endpoints()
    assert ends <= named
    pairs = [(e.official_id, e.agentic_id) for e in entries]
    if len(set(pairs)) == len(pairs) and all(e.kind is not K.RECLASSIFY for e in entries):
        assert ends == named
