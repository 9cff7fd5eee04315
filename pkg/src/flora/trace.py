"""Profiling-trace domain types, CSV ingestion and summary statistics.

A profiling trace records how long each test job ran on each cloud
configuration. Jobs are identified by ``(algorithm, dataset_gib)``;
repeated runs of the same cell are collapsed to their median.
"""

from __future__ import annotations

import csv
import io
import logging
import re
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Iterator, Mapping

from flora.errors import ParseError, ValidationError
from flora.pricing import PriceModel, execution_cost

logger = logging.getLogger(__name__)

CONFIG_HEADER = ("config_id", "instance_type", "node_count", "cores_per_node", "mem_gib_per_node")
TRACE_HEADER = ("algorithm", "dataset_gib", "class", "config_id", "runtime_seconds", "run_index")

_INT_RE = re.compile(r"[+-]?\d+")
_REAL_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


class JobClass(str, Enum):
    """Data-access class a job is filed under.

    ``A`` jobs re-read data or access it depending on program state and keep
    speeding up with memory until their working set is cached. ``B`` jobs
    load data once in arbitrary order and gain little from extra memory.
    """

    A = "A"
    B = "B"

    @property
    def memory_demanding(self) -> bool:
        return self is JobClass.A

    def flipped(self) -> JobClass:
        return JobClass.B if self is JobClass.A else JobClass.A


@dataclass(frozen=True)
class CloudConfig:
    config_id: int
    instance_type: str
    node_count: int
    cores_per_node: int
    mem_gib_per_node: float

    def __post_init__(self) -> None:
        for name in ("config_id", "node_count", "cores_per_node", "mem_gib_per_node"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"config {self.config_id}: non-positive {name}")

    @property
    def total_cores(self) -> int:
        return self.node_count * self.cores_per_node

    @property
    def total_mem_gib(self) -> float:
        return self.node_count * self.mem_gib_per_node


def format_gib(value: float) -> str:
    """Render a dataset size the way it appears in job ids (``188``, ``0.5``)."""
    return str(int(value)) if float(value).is_integer() else repr(float(value))


@dataclass(frozen=True)
class JobSpec:
    algorithm: str
    dataset_gib: float
    job_class: JobClass

    def __post_init__(self) -> None:
        if not self.algorithm:
            raise ValidationError("job with empty algorithm label")
        if not self.dataset_gib > 0:
            raise ValidationError(f"job {self.algorithm}: non-positive dataset_gib")

    @property
    def job_id(self) -> str:
        return f"{self.algorithm}/{format_gib(self.dataset_gib)}"


@dataclass(frozen=True)
class TraceRecord:
    job_id: str
    config_id: int
    runtime_seconds: float
    run_index: int = 0

    def __post_init__(self) -> None:
        if not self.runtime_seconds > 0:
            raise ValidationError(
                f"record {self.job_id} on config {self.config_id}: runtime must be > 0"
            )
        if self.run_index < 0:
            raise ValidationError(f"record {self.job_id}: negative run_index")


@dataclass(frozen=True)
class ProfilingTrace:
    """Immutable set of configs, jobs and runtime records.

    ``aggregated_runtime`` maps ``(job_id, config_id)`` to the median runtime
    over all repetitions of that cell and is derived on construction.
    """

    configs: tuple[CloudConfig, ...]
    jobs: tuple[JobSpec, ...]
    records: tuple[TraceRecord, ...]
    aggregated_runtime: Mapping[tuple[str, int], float] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        configs = tuple(sorted(self.configs, key=lambda c: c.config_id))
        jobs = tuple(sorted(self.jobs, key=lambda j: j.job_id))
        records = tuple(
            sorted(self.records, key=lambda r: (r.job_id, r.config_id, r.run_index))
        )
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "jobs", jobs)
        object.__setattr__(self, "records", records)

        config_ids = [c.config_id for c in configs]
        if len(set(config_ids)) != len(config_ids):
            raise ValidationError("duplicate config_id in catalog")
        job_ids = [j.job_id for j in jobs]
        if len(set(job_ids)) != len(job_ids):
            raise ValidationError("duplicate job in trace")

        known_jobs, known_configs = set(job_ids), set(config_ids)
        cells: dict[tuple[str, int], list[float]] = defaultdict(list)
        seen: set[tuple[str, int, int]] = set()
        for rec in records:
            if rec.job_id not in known_jobs:
                raise ValidationError(f"record references unknown job {rec.job_id!r}")
            if rec.config_id not in known_configs:
                raise ValidationError(f"record references unknown config_id {rec.config_id}")
            key = (rec.job_id, rec.config_id, rec.run_index)
            if key in seen:
                raise ValidationError(
                    f"duplicate record for {rec.job_id} on config {rec.config_id}, "
                    f"run {rec.run_index}"
                )
            seen.add(key)
            cells[(rec.job_id, rec.config_id)].append(rec.runtime_seconds)

        aggregated = {cell: statistics.median(values) for cell, values in sorted(cells.items())}
        object.__setattr__(self, "aggregated_runtime", MappingProxyType(aggregated))

    @property
    def job_ids(self) -> tuple[str, ...]:
        return tuple(j.job_id for j in self.jobs)

    @property
    def config_ids(self) -> tuple[int, ...]:
        return tuple(c.config_id for c in self.configs)

    @property
    def algorithms(self) -> tuple[str, ...]:
        return tuple(sorted({j.algorithm for j in self.jobs}))

    def job(self, job_id: str) -> JobSpec:
        for job in self.jobs:
            if job.job_id == job_id:
                return job
        raise KeyError(job_id)

    def config(self, config_id: int) -> CloudConfig:
        for config in self.configs:
            if config.config_id == config_id:
                return config
        raise KeyError(config_id)

    def runtime(self, job_id: str, config_id: int) -> float:
        return self.aggregated_runtime[(job_id, config_id)]

    def missing_cells(self) -> list[tuple[str, int]]:
        return [
            (job.job_id, config.config_id)
            for job in self.jobs
            for config in self.configs
            if (job.job_id, config.config_id) not in self.aggregated_runtime
        ]

    @property
    def is_complete(self) -> bool:
        return not self.missing_cells()

    def incomplete_job_ids(self) -> set[str]:
        return {job_id for job_id, _ in self.missing_cells()}

    def with_jobs(self, jobs: Iterable[JobSpec]) -> ProfilingTrace:
        """Sub-trace restricted to ``jobs`` (configs are kept in full)."""
        jobs = tuple(jobs)
        keep = {j.job_id for j in jobs}
        return ProfilingTrace(
            configs=self.configs,
            jobs=jobs,
            records=tuple(r for r in self.records if r.job_id in keep),
        )

    def complete_subset(self, *, strict: bool = True) -> ProfilingTrace:
        """Return the trace with incomplete jobs removed.

        Strict mode raises instead, naming every missing cell.
        """
        missing = self.missing_cells()
        if not missing:
            return self
        if strict:
            raise ValidationError("incomplete trace, missing cells: " + _describe_cells(missing))
        dropped = self.incomplete_job_ids()
        logger.warning("excluding incomplete jobs: %s", ", ".join(sorted(dropped)))
        return self.with_jobs(j for j in self.jobs if j.job_id not in dropped)

    def to_csv(self) -> str:
        """Serialize records in the trace-CSV format accepted by :func:`ingest_trace`."""
        by_id = {j.job_id: j for j in self.jobs}
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in self.records:
            job = by_id[rec.job_id]
            writer.writerow(
                [
                    job.algorithm,
                    format_gib(job.dataset_gib),
                    job.job_class.value,
                    rec.config_id,
                    repr(float(rec.runtime_seconds)),
                    rec.run_index,
                ]
            )
        return out.getvalue()


def configs_to_csv(configs: Iterable[CloudConfig]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CONFIG_HEADER)
    for c in sorted(configs, key=lambda c: c.config_id):
        writer.writerow(
            [c.config_id, c.instance_type, c.node_count, c.cores_per_node, format_gib(c.mem_gib_per_node)]
        )
    return out.getvalue()


def _describe_cells(cells: list[tuple[str, int]]) -> str:
    return ", ".join(f"{job_id}@#{config_id}" for job_id, config_id in cells)


def _read_text(source: IO[str] | str | Path) -> str:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8-sig")
    text = source.read()
    return text[1:] if text.startswith("\ufeff") else text


def _rows(source: IO[str] | str | Path, header: tuple[str, ...]) -> Iterator[tuple[int, dict[str, str]]]:
    text = _read_text(source)
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        first = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected header " + ",".join(header)) from None
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}") from exc
    if tuple(col.strip() for col in first) != header:
        raise ParseError(f"unexpected header {first!r}, expected {','.join(header)}")
    try:
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"row {line_no}: expected {len(header)} fields, got {len(row)}")
            yield line_no, {name: cell.strip() for name, cell in zip(header, row)}
    except csv.Error as exc:
        raise ParseError(f"malformed CSV: {exc}") from exc


def _parse_int(value: str, line_no: int, name: str) -> int:
    if not _INT_RE.fullmatch(value):
        raise ParseError(f"row {line_no}: {name} is not an integer: {value!r}")
    return int(value)


def _parse_real(value: str, line_no: int, name: str) -> float:
    if not _REAL_RE.fullmatch(value):
        raise ParseError(f"row {line_no}: {name} is not a number: {value!r}")
    return float(value)


def ingest_configs(source: IO[str] | str | Path) -> tuple[CloudConfig, ...]:
    """Parse a config-CSV catalog, sorted by ``config_id``."""
    configs: dict[int, CloudConfig] = {}
    for line_no, row in _rows(source, CONFIG_HEADER):
        values = {
            "config_id": _parse_int(row["config_id"], line_no, "config_id"),
            "node_count": _parse_int(row["node_count"], line_no, "node_count"),
            "cores_per_node": _parse_int(row["cores_per_node"], line_no, "cores_per_node"),
            "mem_gib_per_node": _parse_real(row["mem_gib_per_node"], line_no, "mem_gib_per_node"),
        }
        for name, value in values.items():
            if value <= 0:
                raise ValidationError(f"row {line_no}: non-positive {name}")
        if not row["instance_type"]:
            raise ValidationError(f"row {line_no}: empty instance_type")
        config = CloudConfig(instance_type=row["instance_type"], **values)
        if config.config_id in configs:
            raise ValidationError(f"duplicate config_id {config.config_id}")
        configs[config.config_id] = config
    return tuple(configs[k] for k in sorted(configs))


def ingest_trace(
    source: IO[str] | str | Path,
    catalog: Iterable[CloudConfig],
    *,
    strict: bool = True,
) -> ProfilingTrace:
    """Parse a trace CSV against ``catalog``.

    In strict mode an incomplete trace (some job lacks a record on some
    config) is rejected; lenient mode logs a warning and keeps the holes.
    """
    catalog = tuple(catalog)
    known_configs = {c.config_id for c in catalog}
    jobs: dict[str, JobSpec] = {}
    records: list[TraceRecord] = []
    for line_no, row in _rows(source, TRACE_HEADER):
        dataset_gib = _parse_real(row["dataset_gib"], line_no, "dataset_gib")
        config_id = _parse_int(row["config_id"], line_no, "config_id")
        runtime = _parse_real(row["runtime_seconds"], line_no, "runtime_seconds")
        run_index = _parse_int(row["run_index"], line_no, "run_index")
        try:
            job_class = JobClass(row["class"])
        except ValueError:
            raise ParseError(f"row {line_no}: class must be A or B, got {row['class']!r}") from None
        if config_id not in known_configs:
            raise ValidationError(f"row {line_no}: unknown config_id {config_id}")
        if runtime <= 0:
            raise ValidationError(f"row {line_no}: non-positive runtime_seconds")
        if run_index < 0:
            raise ValidationError(f"row {line_no}: negative run_index")

        job = JobSpec(row["algorithm"], dataset_gib, job_class)
        existing = jobs.get(job.job_id)
        if existing is None:
            jobs[job.job_id] = job
        elif existing.job_class is not job_class:
            raise ValidationError(
                f"row {line_no}: inconsistent class for {job.job_id} "
                f"({existing.job_class.value} vs {job_class.value})"
            )
        records.append(TraceRecord(job.job_id, config_id, runtime, run_index))

    trace = ProfilingTrace(configs=catalog, jobs=tuple(jobs.values()), records=tuple(records))
    missing = trace.missing_cells()
    if missing:
        message = "incomplete trace, missing cells: " + _describe_cells(missing)
        if strict:
            raise ValidationError(message)
        logger.warning(message)
    return trace


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    std: float
    min: float
    q25: float
    q50: float
    q75: float
    max: float
    std_defined: bool = True

    @classmethod
    def of(cls, values: list[float]) -> Summary:
        if not values:
            raise ValidationError("cannot summarize an empty sample")
        ordered = sorted(values)
        if len(ordered) == 1:
            (v,) = ordered
            return cls(1, v, 0.0, v, v, v, v, v, std_defined=False)
        q25, q50, q75 = statistics.quantiles(ordered, n=4, method="inclusive")
        return cls(
            count=len(ordered),
            mean=statistics.fmean(ordered),
            std=statistics.stdev(ordered),
            min=ordered[0],
            q25=q25,
            q50=q50,
            q75=q75,
            max=ordered[-1],
        )

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("mean", self.mean),
            ("std", self.std),
            ("min", self.min),
            ("25%", self.q25),
            ("50%", self.q50),
            ("75%", self.q75),
            ("max", self.max),
        ]


@dataclass(frozen=True)
class TraceStatistics:
    cost: Summary
    runtime: Summary
    cells: int
    as_of: str | None = None

    @property
    def degenerate(self) -> bool:
        return not self.runtime.std_defined

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for prefix, summary in (("cost", self.cost), ("runtime", self.runtime)):
            for name, value in summary.rows():
                writer.writerow([f"{prefix}_{name}", f"{value:.3f}"])
        writer.writerow(["cells", self.cells])
        if self.degenerate:
            writer.writerow(["std_undefined", 1])
        return out.getvalue()

    def to_text(self) -> str:
        lines = [f"{'':<6} {'Cost':>12} {'Runtime [s]':>14}"]
        for (name, cost), (_, runtime) in zip(self.cost.rows(), self.runtime.rows()):
            lines.append(f"{name:<6} {cost:>12.3f} {runtime:>14.3f}")
        lines.append(f"{self.cells} cells" + (" (std undefined, reported as 0)" if self.degenerate else ""))
        return "\n".join(lines) + "\n"


def trace_statistics(
    trace: ProfilingTrace, prices: PriceModel, *, strict: bool = True
) -> TraceStatistics:
    """Summary statistics of per-cell runtime and cost (sample std, n-1)."""
    trace = trace.complete_subset(strict=strict)
    runtimes: list[float] = []
    costs: list[float] = []
    configs = {c.config_id: c for c in trace.configs}
    for (_, config_id), runtime in trace.aggregated_runtime.items():
        runtimes.append(runtime)
        costs.append(execution_cost(runtime, configs[config_id], prices))
    stats = TraceStatistics(
        cost=Summary.of(costs),
        runtime=Summary.of(runtimes),
        cells=len(runtimes),
        as_of=getattr(prices, "as_of", None),
    )
    if stats.degenerate:
        logger.warning("single-cell trace: standard deviation undefined, reported as 0")
    return stats
