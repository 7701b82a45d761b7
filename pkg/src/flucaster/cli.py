"""Command-line surface: validate, simulate, backtest, score, report.

Exit codes: 0 success, 1 usage error, 2 validation failure, 3 run failure.
Every command that produces files also writes a metadata JSON (command,
parameters, input hashes, package version) sufficient to reproduce them.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from ._version import __version__
from .data import audit_seasons, default_schema, load_schema, parse_ili_csv, write_ili_csv
from .epiweek import season_weeks
from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    FlucasterError,
    IntegrityError,
    RunError,
    SchemaError,
)
from .features import LVCF, ModelSpec
from .geography import load_adjacency, save_adjacency
from .runner import RunConfig, file_sha256, resume, run_backtest
from .scoring import (
    diff_vs_baseline,
    score_forecasts,
    write_scores_csv,
    write_state_aggregates_csv,
    write_week_aggregates_csv,
)
from .synthetic import ARProcessConfig, SyntheticConfig, generate_ar_process, generate_synthetic

DEFAULT_TRAIN_SEASONS = ("2010-11", "2011-12", "2012-13", "2013-14", "2014-15")
DEFAULT_TEST_SEASONS = ("2015-16", "2016-17", "2017-18", "2018-19")


def _write_metadata(out_dir: Path, command: str, params: dict, input_hashes: dict) -> None:
    meta = {
        "artifact": "flucaster",
        "version": __version__,
        "command": command,
        "params": params,
        "params_hash": hashlib.sha256(
            json.dumps(params, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest(),
        "input_hashes": input_hashes,
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_validate(args: argparse.Namespace) -> int:
    schema = load_schema(args.schema) if args.schema else default_schema()
    result = parse_ili_csv(args.data, schema)
    table = result.table
    train = tuple(args.train_seasons or DEFAULT_TRAIN_SEASONS)
    test = tuple(args.test_seasons or DEFAULT_TEST_SEASONS)
    audit = audit_seasons(table, train, test)
    incomplete = table.incomplete_weeks()

    report = {
        "data": str(args.data),
        "rows": len(table),
        "locations": list(table.locations),
        "weeks": [str(table.weeks[0]), str(table.weeks[-1])] if table.weeks else [],
        "rejected_rows": [
            {"line": r.line, "reason": r.reason} for r in result.rejects
        ],
        "incomplete_weeks": {str(w): list(m) for w, m in incomplete.items()},
        "audit": audit.to_dict(),
    }

    print(f"rows: {len(table)}  locations: {len(table.locations)}")
    if table.weeks:
        print(f"span: {table.weeks[0]} .. {table.weeks[-1]}")
    print(
        f"in-season weeks expected: train={audit.train_weeks_expected} "
        f"test={audit.test_weeks_expected}"
    )
    for label, per_state in (
        ("train", audit.train_weeks_per_state),
        ("test", audit.test_weeks_per_state),
    ):
        if per_state:
            lo, hi = min(per_state.values()), max(per_state.values())
            print(f"in-season weeks present per state ({label}): min={lo} max={hi}")
    if incomplete:
        print(f"incomplete weeks (flagged, not fatal): {len(incomplete)}")
    for r in result.rejects:
        print(f"rejected line {r.line}: {r.reason}", file=sys.stderr)

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "validation_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_metadata(
            out_dir,
            "validate",
            {"data": str(args.data), "schema": args.schema, "train": list(train), "test": list(test)},
            {"data": file_sha256(args.data)},
        )
    if result.rejects:
        print(f"validation failed: {len(result.rejects)} rejected rows", file=sys.stderr)
        return 2
    print("validation passed")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    raw: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            raw = json.load(f)
    mode = raw.pop("mode", args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if mode == "ar":
        config = ARProcessConfig.from_dict(raw) if raw else ARProcessConfig()
        graph = load_adjacency().induced_subgraph(list(config.states))
        table = generate_ar_process(config, graph, args.seed)
    elif mode == "curve":
        config = SyntheticConfig.from_dict(raw) if raw else SyntheticConfig()
        graph = load_adjacency().induced_subgraph(list(config.states))
        table = generate_synthetic(config, args.seed)
    else:
        raise ConfigError(f"unknown simulate mode {mode!r}")

    data_path = out_dir / "data.csv"
    adjacency_path = out_dir / "adjacency.csv"
    write_ili_csv(table, data_path)
    save_adjacency(graph, adjacency_path)
    resolved = {"mode": mode, **config.to_dict(), "seed": args.seed}
    (out_dir / "synthetic_config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _write_metadata(
        out_dir,
        "simulate",
        resolved,
        {"data": file_sha256(data_path), "adjacency": file_sha256(adjacency_path)},
    )
    print(f"wrote {data_path} ({len(table)} rows) and {adjacency_path}")
    return 0


def cmd_backtest(args: argparse.Namespace) -> int:
    if args.resume:
        result = resume(args.resume)
    else:
        config = RunConfig.from_json(args.config)
        overrides = {}
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        if args.strict_paper_mode:
            overrides["strict_paper_mode"] = True
        if args.debug_dumps:
            overrides["debug_dumps"] = True
        if args.out:
            overrides["output_dir"] = args.out
        if overrides:
            from dataclasses import replace

            config = replace(config, **overrides)
        result = run_backtest(config)
    n_unavailable = len(result.scores.unavailable)
    print(
        f"backtest complete: {len(result.forecasts)} cells "
        f"({len(result.scores.records)} scored, {n_unavailable} unavailable) "
        f"-> {result.output_dir}"
    )
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    meta_path = run_dir / "run_metadata.json"
    if not meta_path.exists():
        raise RunError(f"{run_dir} is not a run directory (no run_metadata.json)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    stored = meta["config"]
    schema = load_schema(stored["schema_path"]) if stored.get("schema_path") else default_schema()
    table = parse_ili_csv(stored["data_path"], schema).table

    from .runner import _Journal  # scoring reuses the run journal

    journal = _Journal(run_dir)
    completed, _ = journal.load()
    if not completed:
        raise RunError(f"{run_dir} holds no completed forecasts")
    records = sorted(completed.values(), key=lambda r: (r.spec, r.state, r.week))
    scores = score_forecasts(records, table)
    write_scores_csv(scores, run_dir / "scores.csv")
    write_state_aggregates_csv(scores, run_dir / "scores_by_state.csv")
    write_week_aggregates_csv(scores, run_dir / "scores_by_week.csv")
    print(
        f"scored {len(scores.records)} records "
        f"({len(scores.unavailable)} unavailable) -> {run_dir}"
    )
    return 0


def _expected_cells(meta: dict, states: tuple[str, ...]) -> int:
    seasons = meta["config"]["test_seasons"]
    weeks = sum(len(season_weeks(s)) for s in seasons)
    return weeks * len(states)


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    meta_path = run_dir / "run_metadata.json"
    if not meta_path.exists():
        raise RunError(f"{run_dir} is not a run directory (no run_metadata.json)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    stored = meta["config"]
    schema = load_schema(stored["schema_path"]) if stored.get("schema_path") else default_schema()
    table = parse_ili_csv(stored["data_path"], schema).table

    from .runner import _Journal, _cell_key

    journal = _Journal(run_dir)
    completed, _ = journal.load()
    if not completed:
        raise RunError(f"{run_dir} holds no completed forecasts")
    records = sorted(completed.values(), key=lambda r: (r.spec, r.state, r.week))

    specs = sorted({r.spec for r in records})
    states = tuple(sorted({r.state for r in records}))
    weeks = sorted({r.week for r in records})
    missing = [
        _cell_key(spec, state, week)
        for spec in specs
        for state in states
        for week in weeks
        if _cell_key(spec, state, week) not in completed
    ]
    if missing:
        raise RunError(
            f"run incomplete: {len(missing)} missing cells, e.g. {missing[:5]}"
        )

    scores = score_forecasts(records, table)
    out_dir = Path(args.out) if args.out else run_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = [f"flucaster report for {run_dir.name}", ""]
    by_class: dict[str, list[ModelSpec]] = {}
    for spec in specs:
        by_class.setdefault(spec.model_class, []).append(spec)

    import csv

    for model_class in sorted(by_class):
        lines.append(f"== class: {model_class} ==")
        class_specs = sorted(by_class[model_class])
        means = {}
        for spec in class_specs:
            state_wis = [scores.wis_state.get((spec, s)) for s in states]
            state_rmse = [scores.rmse_state.get((spec, s)) for s in states]
            state_wis = [v for v in state_wis if v is not None]
            state_rmse = [v for v in state_rmse if v is not None]
            if state_wis and state_rmse:
                means[spec] = (
                    sum(state_rmse) / len(state_rmse),
                    sum(state_wis) / len(state_wis),
                )
        for spec, (m_rmse, m_wis) in sorted(means.items()):
            lines.append(
                f"  {spec.variant:<14s} mean rMSE {m_rmse:.6f}  mean WIS {m_wis:.6f}"
            )
        if len(means) > 1:
            best_wis = min(means, key=lambda s: means[s][1])
            worst_wis = max(means, key=lambda s: means[s][1])
            best_rmse = min(means, key=lambda s: means[s][0])
            worst_rmse = max(means, key=lambda s: means[s][0])
            lines.append(f"  best/worst by WIS:  {best_wis.variant} / {worst_wis.variant}")
            lines.append(f"  best/worst by rMSE: {best_rmse.variant} / {worst_rmse.variant}")

        baseline = ModelSpec(model_class, "isolated") if model_class != LVCF else None
        if baseline in class_specs and len(class_specs) > 1:
            with open(out_dir / f"diff_{model_class}_by_state.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["variant", "state", "rmse_diff", "wis_diff"])
                for spec in class_specs:
                    if spec == baseline:
                        continue
                    diff = diff_vs_baseline(scores, spec, baseline)
                    for state in states:
                        writer.writerow(
                            [
                                spec.variant,
                                state,
                                repr(diff.rmse_by_state[state]),
                                repr(diff.wis_by_state[state]),
                            ]
                        )
            with open(out_dir / f"diff_{model_class}_by_week.csv", "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["variant", "week", "rmse_diff", "wis_diff"])
                for spec in class_specs:
                    if spec == baseline:
                        continue
                    diff = diff_vs_baseline(scores, spec, baseline)
                    for week in sorted(diff.rmse_by_week):
                        writer.writerow(
                            [
                                spec.variant,
                                str(week),
                                repr(diff.rmse_by_week[week]),
                                repr(diff.wis_by_week[week]),
                            ]
                        )
            lines.append(f"  variant-minus-isolated tables: diff_{model_class}_by_state.csv, diff_{model_class}_by_week.csv")
        lines.append("")

    summary = "\n".join(lines) + "\n"
    (out_dir / "report.txt").write_text(summary, encoding="utf-8")
    _write_metadata(
        out_dir,
        "report",
        {"run": str(run_dir)},
        {"manifest": file_sha256(journal.manifest_path)},
    )
    print(summary, end="")
    print(f"report written to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flucaster",
        description="State-level ILI forecasting engine: validate data, simulate, "
        "run rolling-origin backtests, score, and report.",
    )
    parser.add_argument("--version", action="version", version=f"flucaster {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("validate", help="check a data file against ingest invariants")
    p.add_argument("--data", required=True, help="ILI CSV path")
    p.add_argument("--schema", help="JSON column-mapping file")
    p.add_argument("--train-seasons", nargs="*", help="e.g. 2010-11 2011-12 ...")
    p.add_argument("--test-seasons", nargs="*")
    p.add_argument("--out", help="directory for the JSON report")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="generate synthetic data and adjacency files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON generator config (may set \"mode\")")
    p.add_argument("--mode", choices=["curve", "ar"], default="curve")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("backtest", help="run (or continue) a rolling-origin backtest")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--resume", metavar="RUN_DIR", help="continue a run from its directory")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--jobs", type=int, help="parallel fits within a week")
    p.add_argument("--strict-paper-mode", action="store_true")
    p.add_argument("--debug-dumps", action="store_true")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("score", help="recompute score tables for a completed run")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="within-class variant comparisons for a run")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--out", help="report directory (default: <run>/report)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "command", None) is None:
        parser.print_help()
        return 1
    if args.command == "backtest" and bool(args.config) == bool(args.resume):
        print("error: backtest needs exactly one of --config / --resume", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, IntegrityError, ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FlucasterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
