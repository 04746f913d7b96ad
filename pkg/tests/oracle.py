"""Brute-force reference implementations of the ladder metrics.

Written against the definitions only: everything is recomputed from the raw
concern and edge tokens with plain loops and exact fractions.  Nothing here
imports the metric or graph helpers under test.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import permutations

RANK = {"fatal": 3, "major": 2, "moderate": 1, "minor": 0}
INCLUDED = {
    "strict_only": ("exact",),
    "strict_partial": ("exact", "partial"),
    "loose": ("exact", "partial", "related"),
}


def label(policy, official, agentic):
    """Severity label of an (official, agentic) pair, agentic relative to official."""
    if official not in RANK or agentic not in RANK:
        return "not_applicable"
    d = RANK[agentic] - RANK[official]
    if d == 0:
        ok = True
    elif abs(d) == 1 and policy == "tolerant":
        ok = True
    elif abs(d) == 1 and policy == "hybrid":
        ok = official != "fatal" and agentic != "fatal"
    else:
        ok = False
    if ok:
        return "match"
    return "under" if d < 0 else "over"


def _edges(g, inclusion):
    return [e for e in g.edges if e.match_type.value in INCLUDED[inclusion]]


def _frac(num, den):
    return None if den == 0 else Fraction(num, den)


def _mean(values):
    vals = [v for v in values if v is not None]
    return None if not vals else sum(vals, Fraction(0)) / len(vals)


def recall(g, inclusion="strict_partial"):
    hit = 0
    for o in g.official:
        if any(e.official_id == o.id for e in _edges(g, inclusion)):
            hit += 1
    return _frac(hit, len(g.official))


def phantoms(g, inclusion="strict_partial"):
    out = []
    for a in g.agentic:
        if not any(e.agentic_id == a.id for e in _edges(g, inclusion)):
            out.append(a)
    return out


def phantom(g, inclusion="strict_partial"):
    return _frac(len(phantoms(g, inclusion)), len(g.agentic))


def harmful_phantom(g, inclusion="strict_partial"):
    n = sum(1 for a in phantoms(g, inclusion) if a.severity.value in ("fatal", "major"))
    return _frac(n, len(g.agentic))


def excused(g, inclusion="strict_partial"):
    out = []
    for a in g.agentic:
        if not a.decisive:
            continue
        for e in _edges(g, inclusion):
            if e.agentic_id != a.id:
                continue
            o = next(c for c in g.official if c.id == e.official_id)
            if o.treatment.value == "resolved" and o.addressed_in_pdf.value == "false":
                out.append(a.id)
                break
    return out


def fdr(graphs, inclusion="strict_partial"):
    num = den = 0
    for g in graphs:
        den += len(g.agentic)
        num += sum(1 for a in g.agentic if a.decisive) - len(excused(g, inclusion))
    return _frac(num, den)


def decisive_precision(graphs, inclusion="strict_partial"):
    flags = hits = 0
    for g in graphs:
        for a in g.agentic:
            if not a.decisive:
                continue
            flags += 1
            for e in _edges(g, inclusion):
                o = next(c for c in g.official if c.id == e.official_id)
                if e.agentic_id == a.id and o.treatment.value == "decisive_blocker":
                    hits += 1
                    break
    return _frac(hits, flags)


def phantom_decisive(graphs, inclusion="strict_partial"):
    num = den = 0
    for g in graphs:
        den += len(g.agentic)
        num += sum(1 for a in phantoms(g, inclusion) if a.decisive)
    return _frac(num, den)


def resolved_escalation(graphs, inclusion="strict_partial"):
    num = den = 0
    for g in graphs:
        for e in _edges(g, inclusion):
            o = next(c for c in g.official if c.id == e.official_id)
            a = next(c for c in g.agentic if c.id == e.agentic_id)
            if o.treatment.value == "resolved" and o.addressed_in_pdf.value == "true":
                den += 1
                num += a.severity.value in ("fatal", "major")
    return _frac(num, den)


def treatment_recall(g, treatment, inclusion="strict_partial"):
    pool = [o for o in g.official if o.treatment.value == treatment]
    hit = sum(1 for o in pool if any(e.official_id == o.id for e in _edges(g, inclusion)))
    return _frac(hit, len(pool))


def decisive_recall(graphs, inclusion="strict_partial"):
    return _mean(treatment_recall(g, "decisive_blocker", inclusion) for g in graphs)


def decomposition(g, policy="hybrid", inclusion="strict_partial"):
    """(relevant ids, harmful ids, missed blockers) for one paper."""
    relevant, harmful = [], []
    for a in g.agentic:
        matched = [
            next(c for c in g.official if c.id == e.official_id)
            for e in _edges(g, inclusion)
            if e.agentic_id == a.id
        ]
        high = a.severity.value in ("fatal", "major")
        if g.official_verdict.value == "accept":
            if not high:
                relevant.append(a.id)
            elif not matched:
                harmful.append(a.id)
            elif any(
                o.treatment.value == "dismissed"
                or (o.treatment.value == "resolved" and o.addressed_in_pdf.value == "true")
                for o in matched
            ):
                harmful.append(a.id)
        else:
            if any(label(policy, o.severity.value, a.severity.value) == "match" for o in matched):
                relevant.append(a.id)
            if a.severity.value in ("moderate", "minor") and any(
                o.severity.value in ("fatal", "major")
                and label(policy, o.severity.value, a.severity.value) == "under"
                for o in matched
            ):
                harmful.append(a.id)
    missed = sum(
        1
        for o in g.official
        if o.treatment.value == "decisive_blocker"
        and not any(e.official_id == o.id for e in _edges(g, inclusion))
    )
    return relevant, harmful, missed


def _before(a, b):
    """True if agentic concern ``a`` outranks ``b`` for top-K selection."""
    ra, rb = RANK.get(a.severity.value, -1), RANK.get(b.severity.value, -1)
    if ra != rb:
        return ra > rb
    if a.decisive != b.decisive:
        return a.decisive
    return int(a.id[1:]) < int(b.id[1:])


def top_k_ids(concerns, k):
    """Pick the k best by repeated selection of the maximum."""
    pool = list(concerns)
    out = []
    while pool and len(out) < k:
        best = pool[0]
        for c in pool[1:]:
            if _before(c, best):
                best = c
        out.append(best.id)
        pool.remove(best)
    return set(out)


def top_k_ids_exhaustive(concerns, k):
    """Reference for tiny inputs: the only permutation sorted under ``_before``."""
    for perm in permutations(concerns):
        if all(_before(perm[i], perm[i + 1]) for i in range(len(perm) - 1)):
            return {c.id for c in perm[:k]}
    raise AssertionError("no total order")


class _Restricted:
    """A graph view with the agentic side cut down to ``keep``."""

    def __init__(self, g, keep):
        self.official = g.official
        self.agentic = tuple(a for a in g.agentic if a.id in keep)
        self.edges = tuple(e for e in g.edges if e.agentic_id in keep)
        self.official_verdict = g.official_verdict
        self.paper_id = g.paper_id


def restrict(g, k):
    return _Restricted(g, top_k_ids(g.agentic, k))


def severity_rates(graphs, policy, inclusion="strict_partial"):
    counts = {"match": 0, "under": 0, "over": 0}
    for g in graphs:
        for e in _edges(g, inclusion):
            if e.match_type.value == "related":
                continue
            o = next(c for c in g.official if c.id == e.official_id)
            a = next(c for c in g.agentic if c.id == e.agentic_id)
            lab = label(policy, o.severity.value, a.severity.value)
            if lab in counts:
                counts[lab] += 1
    n = sum(counts.values())
    return n, {k: _frac(v, n) for k, v in counts.items()}


# -- agreement ------------------------------------------------------------------------

# Six targets rated by four judges; the classic worked example for ICC forms.
JUDGES = [[9, 2, 5, 8], [6, 1, 3, 2], [8, 4, 6, 8], [7, 1, 2, 6], [10, 5, 6, 9], [6, 2, 4, 7]]
SMALL = [[1, 2, 3], [2, 2, 4], [5, 6, 5], [3, 3, 2]]
BINARYISH = [[1, 1], [0, 1], [1, 0], [0, 0], [1, 1]]
T3 = [[10, 2, 3], [4, 12, 1], [2, 3, 13]]


def anova_icc(rows):
    """Two-way ANOVA mean squares by hand, in exact arithmetic."""
    n, k = len(rows), len(rows[0])
    x = [[Fraction(v) for v in r] for r in rows]
    grand = sum(sum(r) for r in x) / (n * k)
    row_means = [sum(r) / k for r in x]
    col_means = [sum(x[i][j] for i in range(n)) / n for j in range(k)]
    ssr = k * sum((m - grand) ** 2 for m in row_means)
    ssc = n * sum((m - grand) ** 2 for m in col_means)
    sse = sum((x[i][j] - row_means[i] - col_means[j] + grand) ** 2 for i in range(n) for j in range(k))
    msr, msc, mse = ssr / (n - 1), ssc / (k - 1), sse / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)


def hand_kappa(t):
    total = sum(sum(r) for r in t)
    p_o = Fraction(sum(t[i][i] for i in range(len(t))), total)
    p_e = sum(Fraction(sum(t[i]) * sum(r[i] for r in t), total * total) for i in range(len(t)))
    return (p_o - p_e) / (1 - p_e)
