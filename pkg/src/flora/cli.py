"""``flora`` command-line interface.

Exit codes: 0 success, 1 domain or validation failure, 2 usage or parse
failure. Every subcommand that writes files also writes ``manifest.json``
next to them; ``flora rerun manifest.json`` repeats the run.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Sequence

from flora import datasets
from flora.errors import FloraError, ParseError, ValidationError
from flora.evaluation import (
    Sampling,
    emit_aggregate,
    emit_report,
    evaluate,
    log_grid,
    misclassification_study,
    price_ratio_sweep,
)
from flora.pricing import execution_cost, ingest_price_snapshot
from flora.selector import (
    DEFAULT_POLICIES,
    filter_test_jobs,
    load_replay,
    parse_policy,
    rank_configurations,
)
from flora.synth import generate_trace, load_scenario, scenario_to_json, synth_runtime
from flora.trace import (
    JobClass,
    ProfilingTrace,
    configs_to_csv,
    ingest_configs,
    ingest_trace,
    trace_statistics,
)

logger = logging.getLogger("flora")

ENV_DEFAULTS = {"trace": "FLORA_TRACE", "configs": "FLORA_CONFIGS", "prices": "FLORA_PRICES"}
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(args: argparse.Namespace, name: str) -> Path:
    value = getattr(args, name, None)
    if not value:
        raise UsageError(f"--{name} is required (or set {ENV_DEFAULTS.get(name, '')})")
    path = Path(value)
    if not path.is_file():
        raise UsageError(f"--{name}: no such file {path}")
    return path


def _catalog(args: argparse.Namespace):
    if getattr(args, "configs", None):
        return ingest_configs(_require(args, "configs"))
    return datasets.default_catalog()


def _trace(args: argparse.Namespace) -> ProfilingTrace:
    return ingest_trace(_require(args, "trace"), _catalog(args), strict=not args.lenient)


def _prices(args: argparse.Namespace):
    return ingest_price_snapshot(_require(args, "prices"))


def _policies(args: argparse.Namespace) -> list:
    policies: list = [parse_policy(p) for p in args.policy] if args.policy else list(DEFAULT_POLICIES)
    for name in getattr(args, "packaged_replay", None) or ():
        try:
            policies.append(datasets.replay_fixture(name))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    for spec in getattr(args, "replay", None) or ():
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--replay expects NAME=PATH, got {spec!r}")
        if not Path(path).is_file():
            raise UsageError(f"--replay: no such file {path}")
        policies.append(load_replay(Path(path), name))
    return policies


INPUT_FLAGS = ("--trace", "--configs", "--prices", "--scenario")


def _canonical_argv(args: argparse.Namespace) -> list[str]:
    """Recorded argv with absolute input paths, including env-provided ones."""
    raw, argv = list(args.argv), []
    i = 0
    while i < len(raw):
        token = raw[i]
        flag, eq, value = token.partition("=")
        if flag in INPUT_FLAGS or flag == "--replay":
            if not eq:
                i += 1
                value = raw[i] if i < len(raw) else ""
            i += 1
            continue
        argv.append(token)
        i += 1
    for flag in INPUT_FLAGS:
        value = getattr(args, flag[2:], None)
        if value:
            argv += [flag, str(Path(value).resolve())]
    for spec in getattr(args, "replay", None) or ():
        name, _, path = spec.partition("=")
        argv += ["--replay", f"{name}={Path(path).resolve()}"]
    return argv


def _write_outputs(args: argparse.Namespace, files: dict[str, str], seed: int | None = None) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text, encoding="utf-8", newline="")
    inputs = {}
    for name in ("trace", "configs", "prices", "scenario"):
        value = getattr(args, name, None)
        if value:
            inputs[name] = {"path": str(Path(value).resolve()), "sha256": _sha256(Path(value))}
    for spec in getattr(args, "replay", None) or ():
        name, _, path = spec.partition("=")
        inputs[f"replay:{name}"] = {"path": str(Path(path).resolve()), "sha256": _sha256(Path(path))}
    manifest = {
        "subcommand": args.command,
        "argv": _canonical_argv(args),
        "inputs": inputs,
        "outputs": sorted(files),
        "strict": not getattr(args, "lenient", False),
        "seed": seed,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {', '.join(sorted(files))} to {out}")


def cmd_validate(args: argparse.Namespace) -> int:
    trace = ingest_trace(_require(args, "trace"), _catalog(args), strict=False)
    missing = trace.missing_cells()
    cells = len(trace.aggregated_runtime)
    print(f"{len(trace.jobs)} jobs, {len(trace.configs)} configs, {cells} cells")
    if missing:
        for job_id, config_id in missing:
            print(f"missing cell: {job_id} on config #{config_id}")
        if args.lenient:
            print(f"warning: {len(trace.incomplete_job_ids())} incomplete jobs will be excluded")
            return 0
        return 1
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stats = trace_statistics(_trace(args), _prices(args), strict=not args.lenient)
    text = stats.to_csv() if args.format == "csv" else stats.to_text()
    if args.out:
        _write_outputs(args, {f"statistics.{'csv' if args.format == 'csv' else 'txt'}": text})
    else:
        sys.stdout.write(text)
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    trace = _trace(args)
    prices = _prices(args)
    job_class = JobClass(args.job_class) if args.job_class else None
    test_jobs = filter_test_jobs(trace, job_class, args.algorithm)
    ranking = rank_configurations(test_jobs, prices, strict=not args.lenient)
    scope = f"class {job_class.value}" if job_class else "all classes"
    excluded = f", excluding {args.algorithm}" if args.algorithm else ""
    print(f"#{ranking.selected}")
    print(f"# {scope}{excluded}; {len(ranking.test_job_ids)} test jobs")
    print(f"{'rank':>4}  {'config':>6}  {'score':>8}  full_precision")
    for rank, (config_id, score) in enumerate(ranking.entries, start=1):
        print(f"{rank:>4}  {'#' + str(config_id):>6}  {score:>8.3f}  {score!r}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    report = evaluate(_trace(args), _prices(args), _policies(args), strict=not args.lenient)
    for notice in report.notices:
        print(f"notice: {notice}", file=sys.stderr)
    _write_outputs(
        args,
        {
            "report.csv": emit_report(report, "csv"),
            "aggregate.csv": emit_aggregate(report),
            "report.md": emit_report(report, "markdown"),
            "plotdata.csv": emit_report(report, "plotdata"),
        },
    )
    sys.stdout.write(emit_aggregate(report))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.ratios:
        ratios = [float(x) for x in args.ratios.split(",") if x.strip()]
    else:
        ratios = list(log_grid(args.grid_low, args.grid_high, args.grid_points))
    table = price_ratio_sweep(
        _trace(args),
        ratios,
        args.anchor,
        _policies(args),
        strict=not args.lenient,
        workers=args.workers,
    )
    _write_outputs(
        args,
        {
            "sweep.csv": emit_report(table, "csv"),
            "sweep.md": emit_report(table, "markdown"),
            "plotdata.csv": emit_report(table, "plotdata"),
        },
    )
    return 0


def _k_values(spec: str, n: int) -> list[int]:
    if spec == "all":
        return list(range(n + 1))
    values: list[int] = []
    for part in spec.split(","):
        low, sep, high = part.partition("-")
        try:
            values += list(range(int(low), int(high) + 1)) if sep else [int(low)]
        except ValueError:
            raise UsageError(f"bad --k value {part!r}") from None
    return values


def cmd_robustness(args: argparse.Namespace) -> int:
    trace = _trace(args)
    sampling = Sampling(args.exhaustive_threshold, args.samples, args.seed)
    table = misclassification_study(
        trace, _prices(args), _k_values(args.k, len(trace.jobs)), sampling, strict=not args.lenient
    )
    _write_outputs(
        args,
        {
            "robustness.csv": emit_report(table, "csv"),
            "robustness.md": emit_report(table, "markdown"),
            "plotdata.csv": emit_report(table, "plotdata"),
        },
        seed=args.seed,
    )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    if args.scenario:
        params = load_scenario(_require(args, "scenario"))
    else:
        params = load_scenario(io.StringIO(datasets.default_scenario_text()))
    catalog = _catalog(args)
    trace = generate_trace(params, catalog, relative_sigma=args.sigma, seed=args.seed, runs=args.runs)
    files = {
        "trace.csv": trace.to_csv(),
        "configs.csv": configs_to_csv(catalog),
        "scenario.json": scenario_to_json(params),
    }
    if args.prices:
        # closed-form optimum of the noiseless model, for oracle checks
        prices = _prices(args)
        lines = ["job_id,optimal_config,optimal_cost"]
        for p in params:
            costs = {c.config_id: execution_cost(synth_runtime(p, c), c, prices) for c in catalog}
            best = min(costs, key=lambda cid: (costs[cid], cid))
            lines.append(f"{p.job.job_id},{best},{costs[best]!r}")
        files["oracle.csv"] = "\n".join(lines) + "\n"
    _write_outputs(args, files, seed=args.seed)
    return 0


def cmd_rerun(args: argparse.Namespace) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {path}: {exc}") from None
    for name, entry in manifest.get("inputs", {}).items():
        source = Path(entry["path"])
        if not source.is_file() or _sha256(source) != entry["sha256"]:
            raise ValidationError(f"input {name} changed or missing since the manifest was written: {source}")
    if args.out:
        if "--out" not in argv:
            raise UsageError("manifest run has no --out to override")
        argv[argv.index("--out") + 1] = args.out
    return main(argv)


def _add_inputs(p: argparse.ArgumentParser, *, prices: bool = True) -> None:
    p.add_argument("--trace", default=os.environ.get(ENV_DEFAULTS["trace"]), help="trace CSV")
    p.add_argument(
        "--configs",
        default=os.environ.get(ENV_DEFAULTS["configs"]),
        help="config CSV (default: packaged ten-config catalog)",
    )
    if prices:
        p.add_argument("--prices", default=os.environ.get(ENV_DEFAULTS["prices"]), help="price JSON")
    p.add_argument("--lenient", action="store_true", help="warn about and skip incomplete jobs")


def _add_policies(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--policy",
        action="append",
        help="policy to evaluate (repeatable): flora, fw1c, min-cpu, max-cpu, min-mem, max-mem, random",
    )
    p.add_argument("--replay", action="append", metavar="NAME=PATH", help="replay fixture CSV")
    p.add_argument(
        "--packaged-replay",
        action="append",
        choices=sorted(datasets.REPLAY_FIXTURES),
        help="add a packaged replay fixture",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flora", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a trace for completeness and consistency")
    _add_inputs(p, prices=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="summary statistics of per-cell cost and runtime")
    _add_inputs(p)
    p.add_argument("--format", choices=("csv", "text"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("select", help="rank configurations for a job class")
    _add_inputs(p)
    p.add_argument("--class", dest="job_class", choices=("A", "B"), help="omit to use all test jobs")
    p.add_argument("--algorithm", help="algorithm whose test jobs are excluded")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="leave-one-algorithm-out evaluation")
    _add_inputs(p)
    _add_policies(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate across memory/CPU price ratios")
    _add_inputs(p, prices=False)
    _add_policies(p)
    p.add_argument("--ratios", help="comma-separated ratios (overrides the grid)")
    p.add_argument("--grid-low", type=float, default=-2.0, help="log10 of the smallest ratio")
    p.add_argument("--grid-high", type=float, default=1.0, help="log10 of the largest ratio")
    p.add_argument("--grid-points", type=int, default=31)
    p.add_argument("--anchor", type=float, default=1.0, help="price of one core-hour")
    p.add_argument("--workers", type=int, default=1, help="concurrent evaluations")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness", help="Flora cost under deliberate misclassification")
    _add_inputs(p)
    p.add_argument("--k", default="all", help="'all', or a list like 0-3,6,9")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--exhaustive-threshold", type=int, default=Sampling.exhaustive_threshold)
    p.add_argument("--samples", type=int, default=Sampling.samples)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("synth", help="generate a synthetic trace")
    p.add_argument("--scenario", help="scenario JSON (default: packaged class-separated suite)")
    p.add_argument("--configs", default=os.environ.get(ENV_DEFAULTS["configs"]))
    p.add_argument("--prices", help="also write the closed-form optimum per job")
    p.add_argument("--sigma", type=float, default=0.0, help="relative log-normal noise")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write to a different directory")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = [a for a in argv if a not in ("-v", "--verbose")]
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except (UsageError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
