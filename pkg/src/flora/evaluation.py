"""Leave-one-algorithm-out evaluation of selection policies.

Every job in the trace is treated in turn as a never-seen job: ranking
policies may only learn from test jobs with a different algorithm. The
chosen configuration is then scored against that job's full cost and
runtime rows, normalized so 1.0 is the best value observed for the job.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from flora.errors import SelectionError, ValidationError
from flora.pricing import PriceModel, model_from_ratio
from flora.selector import (
    Policy,
    Replay,
    SelectionPolicy,
    cost_row,
    filter_test_jobs,
    rank_configurations,
    static_selection,
)
from flora.trace import JobClass, JobSpec, ProfilingTrace

logger = logging.getLogger(__name__)

FORMATS = ("csv", "markdown", "plotdata")


def _label(policy: SelectionPolicy) -> str:
    return policy.label


def _mean(values: Sequence[float]) -> float:
    # fsum keeps means independent of summation order
    return math.fsum(values) / len(values)


@dataclass(frozen=True)
class JobResult:
    policy: str
    job_id: str
    selected_config_id: int | None
    normalized_cost: float
    normalized_runtime: float


@dataclass(frozen=True)
class Aggregate:
    mean_cost: float
    mean_runtime: float
    jobs: int
    total_jobs: int

    @property
    def partial(self) -> bool:
        return self.jobs < self.total_jobs


@dataclass(frozen=True)
class EvaluationReport:
    per_job: tuple[JobResult, ...]
    aggregate: Mapping[str, Aggregate]
    policies: tuple[str, ...]
    price_model_as_of: str | None = None
    notices: tuple[str, ...] = ()

    def results_for(self, policy: SelectionPolicy | str) -> dict[str, JobResult]:
        label = policy if isinstance(policy, str) else _label(policy)
        return {r.job_id: r for r in self.per_job if r.policy == label}

    def selections(self, policy: SelectionPolicy | str) -> dict[str, int | None]:
        return {job_id: r.selected_config_id for job_id, r in self.results_for(policy).items()}


class _Selector:
    """Per-evaluation cache of rankings keyed by (class, excluded algorithm)."""

    def __init__(self, trace: ProfilingTrace, prices: PriceModel, strict: bool) -> None:
        self.trace = trace
        self.prices = prices
        self.strict = strict
        self._cache: dict[tuple[JobClass | None, str], int] = {}

    def ranked(self, job_class: JobClass | None, algorithm: str) -> int:
        key = (job_class, algorithm)
        if key not in self._cache:
            test_jobs = filter_test_jobs(self.trace, job_class, algorithm)
            self._cache[key] = rank_configurations(test_jobs, self.prices, strict=self.strict).selected
        return self._cache[key]

    def __call__(self, policy: SelectionPolicy, job: JobSpec, job_class: JobClass) -> int:
        if isinstance(policy, Replay):
            try:
                return policy.selections[job.job_id]
            except KeyError:
                raise SelectionError(f"replay {policy.name!r} has no selection for {job.job_id}") from None
        if policy is Policy.FLORA:
            return self.ranked(job_class, job.algorithm)
        if policy is Policy.FW1C:
            return self.ranked(None, job.algorithm)
        return static_selection(policy, self.trace.configs)


def evaluate(
    trace: ProfilingTrace,
    prices: PriceModel,
    policies: Iterable[SelectionPolicy],
    *,
    selection_classes: Mapping[str, JobClass] | None = None,
    strict: bool = True,
) -> EvaluationReport:
    """Evaluate each policy on every job of ``trace``.

    ``selection_classes`` overrides the class the selecting user assigns to
    individual jobs; test-job labels inside the trace are never changed.
    """
    policies = tuple(policies)
    trace = trace.complete_subset(strict=strict)
    selection_classes = selection_classes or {}
    select = _Selector(trace, prices, strict)

    rows = {}
    for job in trace.jobs:
        costs = cost_row(trace, job.job_id, prices)
        if min(costs.values()) <= 0:
            raise SelectionError("degenerate prices: normalization undefined")
        runtimes = {c.config_id: trace.runtime(job.job_id, c.config_id) for c in trace.configs}
        rows[job.job_id] = (costs, runtimes, min(costs.values()), min(runtimes.values()))

    per_job: list[JobResult] = []
    notices: list[str] = []
    for policy in policies:
        for job in trace.jobs:
            costs, runtimes, min_cost, min_runtime = rows[job.job_id]
            if policy is Policy.RANDOM:
                per_job.append(
                    JobResult(
                        policy.label,
                        job.job_id,
                        None,
                        _mean([costs[c] / min_cost for c in costs]),
                        _mean([runtimes[c] / min_runtime for c in runtimes]),
                    )
                )
                continue
            job_class = selection_classes.get(job.job_id, job.job_class)
            try:
                chosen = select(policy, job, job_class)
            except SelectionError as exc:
                if not isinstance(policy, Replay):
                    raise
                notices.append(f"{policy.label}: skipped {job.job_id} ({exc})")
                continue
            if chosen not in costs:
                raise ValidationError(f"{_label(policy)} selected unknown config {chosen} for {job.job_id}")
            per_job.append(
                JobResult(
                    _label(policy),
                    job.job_id,
                    chosen,
                    costs[chosen] / min_cost,
                    runtimes[chosen] / min_runtime,
                )
            )

    aggregate: dict[str, Aggregate] = {}
    for policy in policies:
        label = _label(policy)
        results = [r for r in per_job if r.policy == label]
        if not results:
            notices.append(f"{label}: no evaluated jobs")
            continue
        aggregate[label] = Aggregate(
            mean_cost=_mean([r.normalized_cost for r in results]),
            mean_runtime=_mean([r.normalized_runtime for r in results]),
            jobs=len(results),
            total_jobs=len(trace.jobs),
        )
        if len(results) < len(trace.jobs):
            notices.append(f"{label}: mean over {len(results)} of {len(trace.jobs)} jobs")
    for notice in notices:
        logger.info(notice)
    return EvaluationReport(
        per_job=tuple(per_job),
        aggregate=aggregate,
        policies=tuple(_label(p) for p in policies),
        price_model_as_of=getattr(prices, "as_of", None),
        notices=tuple(notices),
    )


def log_grid(low_exponent: float, high_exponent: float, points: int) -> tuple[float, ...]:
    """``points`` log-spaced ratios from ``10**low_exponent`` to ``10**high_exponent``."""
    if points < 1:
        raise ValidationError("grid needs at least one point")
    if points == 1:
        return (10.0**low_exponent,)
    step = (high_exponent - low_exponent) / (points - 1)
    return tuple(10.0 ** (low_exponent + i * step) for i in range(points))


@dataclass(frozen=True)
class SweepTable:
    ratios: tuple[float, ...]
    policies: tuple[str, ...]
    values: Mapping[tuple[float, str], float]
    selections: Mapping[tuple[float, str], tuple[int | None, ...]] = field(repr=False)
    anchor: float = 1.0

    def series(self, policy: str) -> list[float]:
        return [self.values[(ratio, policy)] for ratio in self.ratios]


def price_ratio_sweep(
    trace: ProfilingTrace,
    ratios: Sequence[float],
    anchor: float = 1.0,
    policies: Iterable[SelectionPolicy] = (Policy.FLORA,),
    *,
    strict: bool = True,
    workers: int = 1,
) -> SweepTable:
    """Mean normalized cost per policy for each memory/CPU price ratio."""
    ratios = tuple(float(r) for r in ratios)
    if not ratios:
        raise ValidationError("price ratio grid is empty")
    policies = tuple(policies)
    models = [model_from_ratio(r, anchor) for r in ratios]

    def run(prices: PriceModel) -> EvaluationReport:
        return evaluate(trace, prices, policies, strict=strict)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, models))
    else:
        reports = [run(m) for m in models]

    values: dict[tuple[float, str], float] = {}
    selections: dict[tuple[float, str], tuple[int | None, ...]] = {}
    labels = tuple(_label(p) for p in policies)
    for ratio, report in zip(ratios, reports):
        for label in labels:
            values[(ratio, label)] = report.aggregate[label].mean_cost
            chosen = report.selections(label)
            selections[(ratio, label)] = tuple(chosen[j] for j in sorted(chosen))
    return SweepTable(ratios, labels, values, selections, anchor)


@dataclass(frozen=True)
class Sampling:
    exhaustive_threshold: int = 20_000
    samples: int = 2_000
    seed: int = 0


@dataclass(frozen=True)
class RobustnessRow:
    k: int
    mean_cost: float
    stderr: float
    mode: str
    subsets: int


@dataclass(frozen=True)
class RobustnessTable:
    rows: tuple[RobustnessRow, ...]
    n_jobs: int
    reference: Mapping[str, float] = field(default_factory=dict)

    def curve(self) -> dict[int, float]:
        return {row.k: row.mean_cost for row in self.rows}


def misclassification_study(
    trace: ProfilingTrace,
    prices: PriceModel,
    k_values: Iterable[int],
    sampling: Sampling = Sampling(),
    *,
    strict: bool = True,
    reference_policies: Iterable[SelectionPolicy] = (Policy.FW1C, Policy.RANDOM),
) -> RobustnessTable:
    """Mean Flora normalized cost when ``k`` of the jobs are given the wrong class.

    Only the class used at selection time is flipped. A job's selection then
    depends solely on its own class, so each job's cost under the correct
    and the flipped class is computed once and subsets are scored from those.
    """
    trace = trace.complete_subset(strict=strict)
    n = len(trace.jobs)
    k_values = sorted(set(k_values))
    for k in k_values:
        if not 0 <= k <= n:
            raise ValidationError(f"k={k} out of range [0, {n}]")

    correct = evaluate(trace, prices, [Policy.FLORA], strict=strict).results_for(Policy.FLORA)
    inverted = evaluate(
        trace,
        prices,
        [Policy.FLORA],
        selection_classes={j.job_id: j.job_class.flipped() for j in trace.jobs},
        strict=strict,
    ).results_for(Policy.FLORA)
    job_ids = trace.job_ids
    right = [correct[j].normalized_cost for j in job_ids]
    wrong = [inverted[j].normalized_cost for j in job_ids]

    def subset_mean(flipped: Iterable[int]) -> float:
        chosen = set(flipped)
        return _mean([wrong[i] if i in chosen else right[i] for i in range(n)])

    rows = []
    for k in k_values:
        total = math.comb(n, k)
        if total <= sampling.exhaustive_threshold:
            means = [subset_mean(s) for s in itertools.combinations(range(n), k)]
            rows.append(RobustnessRow(k, _mean(means), 0.0, "exhaustive", total))
        else:
            rng = np.random.default_rng([sampling.seed, k])
            means = [
                subset_mean(rng.choice(n, size=k, replace=False).tolist())
                for _ in range(sampling.samples)
            ]
            stderr = statistics.stdev(means) / math.sqrt(len(means)) if len(means) > 1 else 0.0
            rows.append(RobustnessRow(k, _mean(means), stderr, "monte-carlo", len(means)))

    reference_report = evaluate(trace, prices, reference_policies, strict=strict)
    reference = {label: agg.mean_cost for label, agg in reference_report.aggregate.items()}
    return RobustnessTable(tuple(rows), n, reference)


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _fmt_x(value: float) -> str:
    return f"{value:.6g}"


def _csv(rows: Iterable[Sequence[object]]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerows(rows)
    return out.getvalue()


def _markdown(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join(lines) + "\n"


def emit_aggregate(report: EvaluationReport) -> str:
    rows: list[Sequence[object]] = [("policy", "mean_cost", "mean_runtime", "jobs")]
    for label in report.policies:
        agg = report.aggregate.get(label)
        if agg is not None:
            rows.append((label, _fmt(agg.mean_cost), _fmt(agg.mean_runtime), agg.jobs))
    return _csv(rows)


def _emit_evaluation(report: EvaluationReport, fmt: str) -> str:
    if fmt == "csv":
        rows: list[Sequence[object]] = [
            ("policy", "job_id", "selected_config", "normalized_cost", "normalized_runtime")
        ]
        for r in report.per_job:
            selected = "" if r.selected_config_id is None else r.selected_config_id
            rows.append((r.policy, r.job_id, selected, _fmt(r.normalized_cost), _fmt(r.normalized_runtime)))
        return _csv(rows)
    if fmt == "plotdata":
        rows = [("series", "x", "y")]
        rows += [(r.policy, r.job_id, _fmt(r.normalized_cost)) for r in report.per_job]
        return _csv(rows)

    summary_rows = []
    for label in report.policies:
        agg = report.aggregate.get(label)
        if agg is None:
            continue
        name = f"{label} ({agg.jobs} of {agg.total_jobs} jobs)" if agg.partial else label
        summary_rows.append((name, _fmt(agg.mean_cost), _fmt(agg.mean_runtime)))
    text = _markdown(("Approach", "Cost", "Runtime"), summary_rows)

    labels = [label for label in report.policies if label in report.aggregate]
    if labels:
        by_policy = {label: report.results_for(label) for label in labels}
        job_ids = sorted({r.job_id for r in report.per_job})
        detail_rows = []
        for job_id in job_ids:
            row = [job_id]
            for label in labels:
                result = by_policy[label].get(job_id)
                if result is None:
                    row.append("--")
                elif result.selected_config_id is None:
                    row.append(_fmt(result.normalized_cost))
                else:
                    row.append(f"#{result.selected_config_id} {_fmt(result.normalized_cost)}")
            detail_rows.append(row)
        detail_rows.append(["Mean"] + [_fmt(report.aggregate[label].mean_cost) for label in labels])
        text += "\n" + _markdown(["Job"] + labels, detail_rows)
    if report.price_model_as_of:
        text += f"\nPrices as of {report.price_model_as_of}.\n"
    return text


def _emit_sweep(table: SweepTable, fmt: str) -> str:
    if fmt == "csv":
        rows: list[Sequence[object]] = [("ratio", "policy", "mean_cost")]
        rows += [
            (_fmt_x(ratio), label, _fmt(table.values[(ratio, label)]))
            for ratio in table.ratios
            for label in table.policies
        ]
        return _csv(rows)
    if fmt == "plotdata":
        rows = [("series", "x", "y")]
        rows += [
            (label, _fmt_x(ratio), _fmt(table.values[(ratio, label)]))
            for label in table.policies
            for ratio in table.ratios
        ]
        return _csv(rows)
    return _markdown(
        ["memory/CPU price ratio", *table.policies],
        [[_fmt_x(ratio)] + [_fmt(table.values[(ratio, label)]) for label in table.policies] for ratio in table.ratios],
    )


def _emit_robustness(table: RobustnessTable, fmt: str) -> str:
    if fmt == "csv":
        rows: list[Sequence[object]] = [("k", "mean_cost", "stderr", "mode", "subsets")]
        rows += [(r.k, _fmt(r.mean_cost), f"{r.stderr:.6f}", r.mode, r.subsets) for r in table.rows]
        return _csv(rows)
    if fmt == "plotdata":
        rows = [("series", "x", "y")]
        rows += [(Policy.FLORA.label, r.k, _fmt(r.mean_cost)) for r in table.rows]
        for label, value in table.reference.items():
            rows += [(label, r.k, _fmt(value)) for r in table.rows]
        return _csv(rows)
    refs = list(table.reference)
    return _markdown(
        ["misclassified jobs", "Flora", *refs, "mode"],
        [
            [str(r.k), _fmt(r.mean_cost), *(_fmt(table.reference[x]) for x in refs), r.mode]
            for r in table.rows
        ],
    )


def emit_report(result: EvaluationReport | SweepTable | RobustnessTable, fmt: str = "csv") -> str:
    """Render a report, sweep or robustness table as csv, markdown or plotdata."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    if isinstance(result, EvaluationReport):
        return _emit_evaluation(result, fmt)
    if isinstance(result, SweepTable):
        return _emit_sweep(result, fmt)
    if isinstance(result, RobustnessTable):
        return _emit_robustness(result, fmt)
    raise TypeError(f"cannot emit {type(result).__name__}")
