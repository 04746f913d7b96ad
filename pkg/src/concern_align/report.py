"""Render metric, sensitivity and stats results as aligned text, CSV or JSON records."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

from .analysis import CI_METRICS, CiRow, IccRow, SensitivityResult, ci_range
from .concerns import AcTreatment
from .graph import InclusionPolicy, SeverityPolicy
from .metrics import SystemReport, at_k_name

UNDEFINED = "—"
FORMATS = ("text", "csv", "records")


@dataclass(frozen=True)
class Table:
    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


def fmt(v: float | None, digits: int = 3) -> str:
    return UNDEFINED if v is None else f"{v:.{digits}f}"


def fmt_cell(mean: float | None, std: float | None, digits: int = 3, scale: float = 1.0) -> str:
    if mean is None:
        return UNDEFINED
    return f"{mean * scale:.{digits}f}±{(std or 0.0) * scale:.{digits}f}"


def fmt_pp(v: float | None) -> str:
    return UNDEFINED if v is None else f"{v:+.1f}pp"


def render_table(t: Table) -> str:
    grid = [t.columns, *t.rows]
    widths = [max(len(r[i]) for r in grid) for i in range(len(t.columns))]

    def line(row: Sequence[str]) -> str:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "  ".join(cells).rstrip()

    out = [t.title, line(t.columns), "  ".join("-" * w for w in widths)]
    out += [line(r) for r in t.rows]
    return "\n".join(out)


def config_header(config: Mapping[str, Any]) -> list[str]:
    return [f"# {k}: {_scalar(v)}" for k, v in config.items()]


def _scalar(v: Any) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    return str(v)


def render_text(config: Mapping[str, Any], tables: Sequence[Table]) -> str:
    parts = ["\n".join(config_header(config))]
    parts += [render_table(t) for t in tables]
    return "\n\n".join(parts) + "\n"


def render_csv(config: Mapping[str, Any], columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    for line in config_header(config):
        buf.write(line + "\n")
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else _csv_value(r[k]) for k in columns})
    return buf.getvalue()


def _csv_value(v: Any) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def render_records(config: Mapping[str, Any], rows: Sequence[Mapping[str, Any]]) -> str:
    return json.dumps({"config": dict(config), "records": list(rows)}, indent=2, ensure_ascii=False) + "\n"


def render(fmt_name: str, config: Mapping[str, Any], tables: Sequence[Table],
           columns: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
    if fmt_name == "text":
        return render_text(config, tables)
    if fmt_name == "csv":
        return render_csv(config, columns, rows)
    if fmt_name == "records":
        return render_records(config, rows)
    raise ValueError(f"unknown format {fmt_name!r}")


def _label(r: SystemReport) -> str:
    return f"{r.system_id} ({r.model_id})" if r.model_id else r.system_id


# -- metrics ---------------------------------------------------------------------------


def metrics_tables(reports: Sequence[SystemReport]) -> list[Table]:
    def cells(r: SystemReport, names: Sequence[str], **kw) -> tuple[str, ...]:
        return tuple(fmt_cell(r.cells[n].mean, r.cells[n].std, **kw) for n in names)

    def means(r: SystemReport, names: Sequence[str]) -> tuple[str, ...]:
        return tuple(fmt(r.cells[n].mean) for n in names)

    core = ("recall_rejected", "decisive_recall_rejected", "false_decisive_rate", "resolved_escalation",
            "decisive_precision", "phantom_decisive_rate")
    full = ("recall_accepted", "recall_rejected", "false_decisive_rate", "decisive_precision",
            "phantom_decisive_rate", "phantom_rate_accepted", "phantom_rate_rejected", "resolved_escalation")
    acc = ("accuracy_accepted", "accuracy_rejected", "accuracy_overall")
    attention = tuple(f"recall_{t.value}" for t in (AcTreatment.DECISIVE_BLOCKER, AcTreatment.UNRESOLVED,
                                                     AcTreatment.RESOLVED))
    decomp = ("relevant_rate_accepted", "harmful_rate_accepted", "harmful_phantom_rate",
              "relevant_rate_rejected", "harmful_rate_rejected", "missed_blockers")
    ks = reports[0].config.k_values if reports else ()

    tables = [
        Table(
            "Core concern-level metrics (run mean ± std)",
            ("System", "Rcl (rej)", "Dec. rcl (rej)", "FDR (acc)", "Res. esc (acc)", "DecP (rej)", "PhDec (rej)"),
            tuple((_label(r), *cells(r, core)) for r in reports),
        ),
        Table(
            "Verdict-stratified accuracy, % (run mean ± std)",
            ("System", "Acc. acc.", "Rej. acc.", "Overall"),
            tuple((_label(r), *cells(r, acc, digits=1, scale=100.0)) for r in reports),
        ),
        Table(
            "Full verdict-stratified metrics (run means)",
            ("System", "Recall acc", "Recall rej", "FDR (acc)", "DecPrec (rej)", "PhDec (rej)",
             "Phantom acc", "Phantom rej", "Res.-esc. (acc)", "Concerns/paper"),
            tuple((_label(r), *means(r, full), fmt(r.cells["concerns_per_paper"].mean, 1)) for r in reports),
        ),
        Table(
            "Recall by AC treatment on rejected papers (run means)",
            ("System", "Dec.", "Unres.", "Res.", "Gap"),
            tuple((_label(r), *means(r, attention), fmt_pp(r.cells["attention_gap"].mean)) for r in reports),
        ),
        Table(
            "FDR on accepted papers and decisive recall on rejected papers by K (run means)",
            ("System", *(f"FDR@{k}" for k in ks), *(f"DecRcl@{k}" for k in ks)),
            tuple(
                (
                    _label(r),
                    *(fmt(r.cells[at_k_name("false_decisive_rate", k)].mean) for k in ks),
                    *(fmt(r.cells[at_k_name("decisive_recall_rejected", k)].mean) for k in ks),
                )
                for r in reports
            ),
        ),
        Table(
            "Decision-relevant and decision-harmful output (run means)",
            ("System", "Relevant (acc)", "Harmful (acc)", "Harm. phantom (acc)", "Relevant (rej)",
             "Harmful (rej)", "Missed blockers"),
            tuple((_label(r), *means(r, decomp[:-1]), fmt(r.cells["missed_blockers"].mean, 1)) for r in reports),
        ),
    ]
    if any(r.missing for r in reports):
        tables.append(
            Table(
                "Missing graphs (runs reported as undefined)",
                ("System", "Run", "Paper"),
                tuple((r.system_id, run, pid) for r in reports for pid, run in r.missing),
            )
        )
    return tables


METRIC_COLUMNS = ("system", "model", "level", "run", "paper", "metric", "value", "source")


def metrics_records(
    reports: Sequence[SystemReport], predictions: Mapping[tuple[str, str, str], Any] | None = None
) -> list[dict[str, Any]]:
    """One record per (system, run, paper, metric); run-level and cross-run rows use paper "*".

    Predicted verdicts are included as ``predicted_verdict`` records carrying
    their source.
    """
    predictions = predictions or {}
    rows: list[dict[str, Any]] = []
    for r in reports:
        base = {"system": r.system_id, "model": r.model_id}
        for run in r.runs:
            for key in sorted(k for k in predictions if k[1] == r.system_id and k[2] == run):
                v = predictions[key]
                rows.append({**base, "level": "paper", "run": run, "paper": key[0], "metric": "predicted_verdict",
                             "value": v.value.value if v else None, "source": v.source.value if v else None})
            for pid in sorted(r.per_paper.get(run, {})):
                for name, v in r.per_paper[run][pid].items():
                    rows.append({**base, "level": "paper", "run": run, "paper": pid, "metric": name, "value": v})
            for name, v in r.per_run[run].items():
                rows.append({**base, "level": "run", "run": run, "paper": "*", "metric": name, "value": v})
        for name, c in r.cells.items():
            rows.append({**base, "level": "mean", "run": "*", "paper": "*", "metric": name, "value": c.mean})
            rows.append({**base, "level": "std", "run": "*", "paper": "*", "metric": name, "value": c.std})
    return rows


# -- sensitivity -----------------------------------------------------------------------

_INC_LABEL = {
    InclusionPolicy.STRICT_ONLY: "strict-only",
    InclusionPolicy.STRICT_PARTIAL: "strict+partial",
    InclusionPolicy.LOOSE: "loose",
}


def sensitivity_tables(results: Sequence[SensitivityResult]) -> list[Table]:
    tables = []
    for res in results:
        for title, grid in (("Recall", res.recall), ("Decisive recall (rej)", res.decisive_recall)):
            tables.append(
                Table(
                    f"{title} by severity policy x inclusion: {res.system_id}",
                    ("Severity policy", *(_INC_LABEL[i] for i in InclusionPolicy)),
                    tuple((sp.value, *(fmt(grid[(sp, inc)]) for inc in InclusionPolicy)) for sp in SeverityPolicy),
                )
            )
        tables.append(
            Table(
                f"Severity match rates by policy: {res.system_id}",
                ("Policy", "Match", "Under", "Over", "Edges"),
                tuple(
                    (sp.value, fmt(r.match), fmt(r.under), fmt(r.over), str(r.edges))
                    for sp, r in ((sp, res.severity[sp]) for sp in SeverityPolicy)
                ),
            )
        )
    return tables


SENSITIVITY_COLUMNS = ("system", "severity_policy", "inclusion", "metric", "value")


def sensitivity_records(results: Sequence[SensitivityResult]) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for res in results:
        for sp in SeverityPolicy:
            for inc in InclusionPolicy:
                for metric, grid in (("recall", res.recall), ("decisive_recall", res.decisive_recall)):
                    rows.append({"system": res.system_id, "severity_policy": sp.value, "inclusion": inc.value,
                                 "metric": metric, "value": grid[(sp, inc)]})
            r = res.severity[sp]
            for metric, v in (("severity_match", r.match), ("severity_under", r.under),
                              ("severity_over", r.over), ("severity_edges", float(r.edges))):
                rows.append({"system": res.system_id, "severity_policy": sp.value, "inclusion": "*",
                             "metric": metric, "value": v})
    return rows


# -- stats --------------------------------------------------------------------------------

_CI_LABEL = {
    "false_decisive_rate": "FDR (acc)",
    "decisive_recall_rejected": "Dec. recall (rej)",
    "recall_rejected": "Recall (rej)",
    "resolved_escalation": "Res.-esc. (acc)",
}


def _interval(bounds: tuple[float, float] | None) -> str:
    return UNDEFINED if bounds is None else f"[{bounds[0]:.3f}, {bounds[1]:.3f}]"


def stats_tables(icc: Sequence[IccRow], cis: Sequence[CiRow]) -> list[Table]:
    systems = list(dict.fromkeys([r.system_id for r in icc] + [r.system_id for r in cis]))
    by = {(r.system_id, r.metric): r for r in icc}
    tables = [
        Table(
            "ICC(2,1), papers as subjects and runs as raters",
            ("System", "Verdict", "Recall", "Phantom", "Verdict kappa", "Excluded (v/r/p)"),
            tuple(
                (
                    s,
                    *(fmt(by[(s, m)].icc) for m in ("verdict", "recall", "phantom")),
                    fmt(by[(s, "verdict")].kappa),
                    "/".join(str(by[(s, m)].excluded) for m in ("verdict", "recall", "phantom")),
                )
                for s in systems
                if (s, "verdict") in by
            ),
        ),
        Table(
            "Bootstrap 95% CIs (range across runs)",
            ("System", *(_CI_LABEL[m] for m in CI_METRICS)),
            tuple(
                (s, *(_interval(ci_range([r for r in cis if r.system_id == s], m)) for m in CI_METRICS))
                for s in systems
            ),
        ),
        Table(
            "Per-run bootstrap intervals",
            ("System", "Run", "Metric", "Point", "Lower", "Upper", "Papers", "Excl. papers", "Excl. resamples"),
            tuple(
                (
                    r.system_id, r.run_id, r.metric,
                    fmt(r.ci.point if r.ci else None), fmt(r.ci.lower if r.ci else None),
                    fmt(r.ci.upper if r.ci else None), str(r.papers), str(r.excluded),
                    str(r.ci.excluded_resamples) if r.ci else UNDEFINED,
                )
                for r in cis
            ),
        ),
    ]
    return tables


STATS_COLUMNS = ("system", "run", "metric", "icc", "kappa", "agreement", "point", "lower", "upper",
                 "seed", "resamples", "papers", "excluded_papers", "excluded_resamples")


def stats_records(icc: Sequence[IccRow], cis: Sequence[CiRow], seed: int, resamples: int) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for r in icc:
        rows.append({"system": r.system_id, "run": "*", "metric": f"icc_{r.metric}", "icc": r.icc,
                     "kappa": r.kappa, "agreement": r.agreement, "point": None, "lower": None, "upper": None,
                     "seed": None, "resamples": None, "papers": r.papers, "excluded_papers": r.excluded,
                     "excluded_resamples": None})
    for r in cis:
        rows.append({"system": r.system_id, "run": r.run_id, "metric": r.metric, "icc": None, "kappa": None,
                     "agreement": None, "point": r.ci.point if r.ci else None,
                     "lower": r.ci.lower if r.ci else None, "upper": r.ci.upper if r.ci else None,
                     "seed": seed, "resamples": resamples, "papers": r.papers, "excluded_papers": r.excluded,
                     "excluded_resamples": r.ci.excluded_resamples if r.ci else None})
    return rows
