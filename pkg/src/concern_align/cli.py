"""Command-line entry point: lint, apply-overrides, metrics, sensitivity, stats, worksheets, fixtures."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .analysis import ci_rows, icc_rows, sensitivity
from .concerns import SchemaError, load_manifest
from .corpus import Corpus, GraphKey, lint_corpus, load_corpus, predictions, usable_graphs
from .fixtures import PROFILES, generate_fixture_corpus
from .graph import Diagnostic, InclusionPolicy, SeverityPolicy, dump_json, graph_to_dict, has_errors
from .metrics import DEFAULT_K_VALUES, LadderConfig, VerdictSource, aggregate_system
from .overrides import (
    OverrideError,
    apply_overrides,
    diff_graphs,
    generate_worksheet,
    isolation_violations,
    parse_overrides,
)
from .report import (
    FORMATS,
    METRIC_COLUMNS,
    SENSITIVITY_COLUMNS,
    STATS_COLUMNS,
    metrics_records,
    metrics_tables,
    render,
    sensitivity_records,
    sensitivity_tables,
    stats_records,
    stats_tables,
)
from .stats import CI_LEVEL, CI_METHOD, STREAM_NAME

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULT_RESAMPLES = 10_000
DEFAULT_SEED = 0
_EXT = {"text": "txt", "csv": "csv", "records": "json"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    ladder: LadderConfig
    manifest: Path | None
    overrides: Path | None
    out: Path | None
    resamples: int
    seed: int
    fmt: str
    force: bool

    def effective(self, command: str) -> dict[str, Any]:
        return {
            "command": command,
            "severity_policy": self.ladder.severity_policy.value,
            "inclusion": self.ladder.inclusion.value,
            "k_values": list(self.ladder.k_values),
            "predicted_verdict_source": self.ladder.predicted_verdict_source.value,
            "resamples": self.resamples,
            "seed": self.seed,
            "ci": f"{CI_METHOD} {CI_LEVEL:.0%}",
            "rng": STREAM_NAME,
            "bootstrap_population": "papers within the stratum each metric is defined on",
        }


def _inclusion(value: str) -> InclusionPolicy:
    try:
        return InclusionPolicy(value.replace("-", "_"))
    except ValueError:
        raise ConfigError(f"unknown inclusion policy {value!r}") from None


def _k_values(value: Any) -> tuple[int, ...]:
    if isinstance(value, str):
        try:
            value = [int(x) for x in value.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--k expects comma-separated integers, got {value!r}") from None
    if not isinstance(value, list) or not all(isinstance(k, int) and not isinstance(k, bool) for k in value):
        raise ConfigError(f"k_values must be a list of integers, got {value!r}")
    return tuple(sorted(set(value)))


_CONFIG_KEYS = {"severity_policy", "inclusion", "k_values", "predicted_verdict_source", "resamples", "seed",
                "format", "manifest", "overrides", "out"}


def _as_path(v: Any) -> Path | None:
    return Path(v) if v is not None else None


def resolve_config(args: argparse.Namespace) -> EngineConfig:
    """Flags override the JSON config file, which overrides built-in defaults."""
    file_cfg: dict[str, Any] = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            file_cfg = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(file_cfg) - _CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        base = path.parent
        for key in ("manifest", "overrides", "out"):
            if key in file_cfg:
                file_cfg[key] = str(base / file_cfg[key])

    def pick(flag: str, key: str, default: Any) -> Any:
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return file_cfg.get(key, default)

    try:
        ladder = LadderConfig(
            severity_policy=SeverityPolicy(pick("severity_policy", "severity_policy", SeverityPolicy.HYBRID.value)),
            inclusion=_inclusion(pick("inclusion", "inclusion", InclusionPolicy.STRICT_PARTIAL.value)),
            k_values=_k_values(pick("k", "k_values", list(DEFAULT_K_VALUES))),
            predicted_verdict_source=VerdictSource(
                pick("verdict_source", "predicted_verdict_source", VerdictSource.GATE_DEFAULT_REJECT.value)
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    resamples = pick("resamples", "resamples", DEFAULT_RESAMPLES)
    seed = pick("seed", "seed", DEFAULT_SEED)
    fmt = pick("format", "format", "text")
    if not isinstance(resamples, int) or resamples < 1:
        raise ConfigError(f"resamples must be a positive integer, got {resamples!r}")
    if not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}")
    return EngineConfig(
        ladder=ladder,
        manifest=_as_path(pick("manifest", "manifest", None)),
        overrides=_as_path(pick("overrides", "overrides", None)),
        out=_as_path(pick("out", "out", None)),
        resamples=resamples,
        seed=seed,
        fmt=fmt,
        force=bool(getattr(args, "force", False)),
    )


# -- shared helpers ---------------------------------------------------------------------


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _require_manifest(cfg: EngineConfig) -> Path:
    if cfg.manifest is None:
        raise ConfigError("--manifest is required")
    return cfg.manifest


def _emit(cfg: EngineConfig, name: str, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"{name}.{_EXT[cfg.fmt]}"
    path.write_text(text, encoding="utf-8")
    _err(f"wrote {path}")


def _lint(corpus: Corpus, cfg: EngineConfig) -> tuple[dict[GraphKey, list[Diagnostic]], list[Diagnostic]]:
    per_graph = lint_corpus(corpus, cfg.ladder.severity_policy)
    flat = list(corpus.load_errors) + [d for key in sorted(per_graph) for d in per_graph[key]]
    return per_graph, flat


def _gated_corpus(cfg: EngineConfig) -> tuple[Corpus, dict[GraphKey, Any], bool] | int:
    """Load, lint and return usable graphs; an int is an exit status."""
    corpus = load_corpus(_require_manifest(cfg))
    per_graph, flat = _lint(corpus, cfg)
    errors = [d for d in flat if d.is_error]
    if errors:
        for d in errors:
            _err(d.format())
        if not cfg.force:
            _err(f"{len(errors)} lint error(s); rerun with --force to skip the failing graphs")
            return EXIT_FAIL
        _err(f"--force: skipping graphs with errors ({len(errors)} error(s))")
    return corpus, usable_graphs(corpus, cfg.ladder, per_graph), bool(errors)


# -- verbs --------------------------------------------------------------------------------


def cmd_lint(cfg: EngineConfig) -> int:
    corpus = load_corpus(_require_manifest(cfg))
    _, flat = _lint(corpus, cfg)
    for d in flat:
        print(d.format())
    n_err = sum(1 for d in flat if d.is_error)
    _err(f"{len(corpus.graphs)} graph(s) linted, {n_err} error(s), {len(flat) - n_err} warning(s)")
    return EXIT_FAIL if n_err else EXIT_OK


def _override_path(root: Path, key: GraphKey) -> Path:
    return root / f"{key[0]}.{key[1]}.{key[2]}.json"


def corrected_path(graph_path: Path) -> Path:
    return graph_path.with_name(graph_path.name.removesuffix(".json") + ".corrected.json")


def cmd_apply_overrides(cfg: EngineConfig) -> int:
    manifest_path = _require_manifest(cfg)
    if cfg.overrides is None:
        raise ConfigError("--overrides is required")
    if not cfg.overrides.is_dir():
        raise ConfigError(f"overrides directory {cfg.overrides} does not exist")
    corpus = load_corpus(manifest_path)
    failed = len(corpus.load_errors)
    for d in corpus.load_errors:
        _err(d.format())
    known = {_override_path(cfg.overrides, k).name for k in corpus.graphs}
    for stray in sorted(p.name for p in cfg.overrides.glob("*.json")):
        if stray not in known:
            _err(f"error {stray}: override file matches no loaded graph")
            failed += 1

    written: dict[GraphKey, Path] = {}
    for key, g in sorted(corpus.graphs.items()):
        label = "/".join(key)
        src = _override_path(cfg.overrides, key)
        try:
            entries = parse_overrides(src.read_bytes(), source=str(src)) if src.is_file() else []
            out = apply_overrides(g, entries, cfg.ladder.severity_policy)
        except (SchemaError, OverrideError) as exc:
            failed += 1
            _err(f"error {label}: {exc}")
            for d in getattr(exc, "diagnostics", ()):
                _err(f"  {d.format()}")
            continue
        dest = corrected_path(corpus.manifest.graph_index[key].graph)
        dump_json(graph_to_dict(out), dest)
        written[key] = dest
        diff = diff_graphs(g, out)
        print(f"{label}: {'unchanged' if diff.is_empty else 'changed'}")
        for line in diff.summary_lines():
            print(f"  {line}")

    raw = json.loads(manifest_path.read_text(encoding="utf-8"))
    root = manifest_path.parent
    for entry in raw["graphs"]:
        key = (entry["paper_id"], entry["system_id"], entry["run_id"])
        if key in written:
            entry["graph"] = written[key].relative_to(root).as_posix() if written[key].is_relative_to(root) \
                else str(written[key])
    dump_json(raw, corrected_path(manifest_path))
    _err(f"{len(written)} corrected graph(s) written, {failed} failure(s)")
    return EXIT_FAIL if failed else EXIT_OK


def _system_runs(corpus: Corpus) -> list[tuple[str, str, tuple[str, ...]]]:
    return [(s.system_id, s.model_id, s.runs) for s in corpus.manifest.systems]


def _predictions(corpus: Corpus, cfg: EngineConfig):
    return predictions(corpus, cfg.ladder.predicted_verdict_source)


def cmd_metrics(cfg: EngineConfig) -> int:
    gated = _gated_corpus(cfg)
    if isinstance(gated, int):
        return gated
    corpus, graphs, had_errors = gated
    preds = _predictions(corpus, cfg)
    papers = sorted(corpus.manifest.papers)
    reports = [
        aggregate_system(sid, model, runs, papers, graphs, preds, cfg.ladder)
        for sid, model, runs in _system_runs(corpus)
    ]
    text = render(cfg.fmt, cfg.effective("metrics"), metrics_tables(reports), METRIC_COLUMNS,
                  metrics_records(reports, preds))
    _emit(cfg, "metrics", text)
    return EXIT_FAIL if had_errors else EXIT_OK


def cmd_sensitivity(cfg: EngineConfig) -> int:
    gated = _gated_corpus(cfg)
    if isinstance(gated, int):
        return gated
    corpus, graphs, had_errors = gated
    results = [
        sensitivity(sid, [g for k, g in sorted(graphs.items()) if k[1] == sid], cfg.ladder)
        for sid, _, _ in _system_runs(corpus)
    ]
    text = render(cfg.fmt, cfg.effective("sensitivity"), sensitivity_tables(results), SENSITIVITY_COLUMNS,
                  sensitivity_records(results))
    _emit(cfg, "sensitivity", text)
    return EXIT_FAIL if had_errors else EXIT_OK


def cmd_stats(cfg: EngineConfig) -> int:
    gated = _gated_corpus(cfg)
    if isinstance(gated, int):
        return gated
    corpus, graphs, had_errors = gated
    preds = _predictions(corpus, cfg)
    papers = sorted(corpus.manifest.papers)
    icc, cis = [], []
    for sid, _, runs in _system_runs(corpus):
        icc += icc_rows(sid, runs, papers, graphs, preds, cfg.ladder)
        cis += ci_rows(sid, runs, papers, graphs, cfg.ladder, cfg.resamples, cfg.seed)
    text = render(cfg.fmt, cfg.effective("stats"), stats_tables(icc, cis), STATS_COLUMNS,
                  stats_records(icc, cis, cfg.seed, cfg.resamples))
    _emit(cfg, "stats", text)
    return EXIT_FAIL if had_errors else EXIT_OK


def worksheet_name(key: GraphKey) -> str:
    return f"{key[0]}__{key[1]}__{key[2]}.txt"


def cmd_worksheets(cfg: EngineConfig) -> int:
    if cfg.out is None:
        raise ConfigError("--out is required for worksheets")
    corpus = load_corpus(_require_manifest(cfg))
    per_graph, flat = _lint(corpus, cfg)
    failed = 0
    for d in flat:
        if d.is_error:
            _err(d.format())
            failed += 1
    cfg.out.mkdir(parents=True, exist_ok=True)
    count = 0
    for key, g in sorted(corpus.graphs.items()):
        if has_errors(per_graph[key]):
            continue
        text = generate_worksheet(g, corpus.papers[key[0]]).render()
        leaks = isolation_violations(text)
        if leaks:
            _err(f"error {'/'.join(key)}: worksheet would leak {', '.join(sorted(set(leaks)))}")
            failed += 1
            continue
        (cfg.out / worksheet_name(key)).write_text(text, encoding="utf-8")
        count += 1
    _err(f"{count} worksheet(s) written to {cfg.out}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_fixtures(args: argparse.Namespace, cfg: EngineConfig) -> int:
    if cfg.out is None:
        raise ConfigError("--out is required for fixtures")
    if args.size < 1 or args.systems < 1 or args.runs < 1:
        raise ConfigError("--size, --systems and --runs must be >= 1")
    path = generate_fixture_corpus(args.profile, args.size, cfg.seed, cfg.out, systems=args.systems, runs=args.runs)
    load_manifest(path)
    _err(f"wrote {path}")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------------------


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="corpus manifest (JSON)")
    p.add_argument("--config", help="JSON config file; flags take precedence over it")
    p.add_argument("--severity-policy", choices=[s.value for s in SeverityPolicy])
    p.add_argument("--inclusion", choices=["strict-only", "strict-partial", "loose"])
    p.add_argument("--k", help="comma-separated top-K values, e.g. 3,5,7,10,15")
    p.add_argument("--verdict-source", choices=[v.value for v in VerdictSource])
    p.add_argument("--seed", type=int)
    p.add_argument("--resamples", type=int)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--force", action="store_true", help="skip graphs that fail lint instead of stopping")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="concern-align", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("lint", "validate every graph in the corpus"),
        ("apply-overrides", "apply verifier overrides and write corrected graphs"),
        ("metrics", "compute the metric ladder per system"),
        ("sensitivity", "sweep severity and inclusion policies"),
        ("stats", "ICC, kappa and bootstrap intervals"),
        ("worksheets", "write one audit worksheet per graph"),
        ("fixtures", "generate a seeded synthetic corpus"),
    ):
        p = sub.add_parser(name, help=helptext)
        _shared(p)
        if name == "apply-overrides":
            p.add_argument("--overrides", help="directory of <paper>.<system>.<run>.json override files")
        if name == "fixtures":
            p.add_argument("--profile", choices=PROFILES, required=True)
            p.add_argument("--size", type=int, default=24)
            p.add_argument("--systems", type=int, default=1)
            p.add_argument("--runs", type=int, default=3)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "fixtures":
            return cmd_fixtures(args, cfg)
        return {
            "lint": cmd_lint,
            "apply-overrides": cmd_apply_overrides,
            "metrics": cmd_metrics,
            "sensitivity": cmd_sensitivity,
            "stats": cmd_stats,
            "worksheets": cmd_worksheets,
        }[args.command](cfg)
    except ConfigError as exc:
        _err(f"error: {exc}")
        return EXIT_USAGE
    except (SchemaError, OSError) as exc:
        _err(f"error: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
