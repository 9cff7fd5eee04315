"""Configuration ranking and the selection policies compared against it.

The ranking scores every configuration by the sum, over the applicable test
jobs, of that job's cost on the configuration divided by its cheapest cost
anywhere. Dividing per job means a long-running test job cannot dominate
the ranking. Ties are broken by ascending config id.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import IO, Iterable, Mapping, Union

from flora.errors import ParseError, SelectionError, ValidationError
from flora.pricing import PriceModel, execution_cost
from flora.trace import CloudConfig, JobClass, JobSpec, ProfilingTrace, _read_text


class Policy(str, Enum):
    """Built-in selection policies; the value doubles as the report label."""

    FLORA = "Flora"
    FW1C = "Flora with one class"
    MIN_CPU = "minimize CPU"
    MAX_CPU = "maximize CPU"
    MIN_MEM = "minimize memory"
    MAX_MEM = "maximize memory"
    RANDOM = "random selection"

    @property
    def label(self) -> str:
        return self.value


@dataclass(frozen=True)
class Replay:
    """Fixed per-job selections recorded from another system."""

    name: str
    selections: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "selections", MappingProxyType(dict(sorted(self.selections.items()))))

    @property
    def label(self) -> str:
        return self.name

    def __hash__(self) -> int:
        return hash((self.name, tuple(self.selections.items())))


SelectionPolicy = Union[Policy, Replay]

STATIC_POLICIES = (Policy.MIN_CPU, Policy.MAX_CPU, Policy.MIN_MEM, Policy.MAX_MEM)
DEFAULT_POLICIES = (
    Policy.MIN_CPU,
    Policy.RANDOM,
    Policy.MIN_MEM,
    Policy.MAX_CPU,
    Policy.MAX_MEM,
    Policy.FW1C,
    Policy.FLORA,
)

_POLICY_ALIASES = {
    "flora": Policy.FLORA,
    "fw1c": Policy.FW1C,
    "min-cpu": Policy.MIN_CPU,
    "max-cpu": Policy.MAX_CPU,
    "min-mem": Policy.MIN_MEM,
    "max-mem": Policy.MAX_MEM,
    "random": Policy.RANDOM,
}


def parse_policy(name: str) -> Policy:
    key = name.strip().lower()
    if key in _POLICY_ALIASES:
        return _POLICY_ALIASES[key]
    for policy in Policy:
        if policy.value.lower() == key:
            return policy
    raise ValidationError(f"unknown policy {name!r}; choose from {', '.join(_POLICY_ALIASES)}")


@dataclass(frozen=True)
class ConfigRanking:
    entries: tuple[tuple[int, float], ...]
    test_job_ids: tuple[str, ...] = ()

    @property
    def selected(self) -> int:
        return self.entries[0][0]

    @property
    def scores(self) -> dict[int, float]:
        return dict(self.entries)

    def order(self) -> tuple[int, ...]:
        return tuple(config_id for config_id, _ in self.entries)


def filter_test_jobs(
    trace: ProfilingTrace,
    target_class: JobClass | None = None,
    excluded_algorithm: str | None = None,
) -> ProfilingTrace:
    """Keep test jobs of ``target_class`` whose algorithm differs from ``excluded_algorithm``.

    Every dataset size of the excluded algorithm is dropped, not only the
    one being selected for.
    """
    jobs = [
        job
        for job in trace.jobs
        if (target_class is None or job.job_class is target_class)
        and job.algorithm != excluded_algorithm
    ]
    if not jobs:
        raise SelectionError(
            "no applicable test jobs"
            f" (class {target_class.value if target_class else 'any'},"
            f" excluding {excluded_algorithm or 'nothing'})"
        )
    return trace.with_jobs(jobs)


def cost_row(trace: ProfilingTrace, job_id: str, prices: PriceModel) -> dict[int, float]:
    """Execution cost of ``job_id`` on every config of the trace."""
    return {
        config.config_id: execution_cost(trace.runtime(job_id, config.config_id), config, prices)
        for config in trace.configs
    }


def rank_configurations(
    test_jobs: ProfilingTrace, prices: PriceModel, *, strict: bool = True
) -> ConfigRanking:
    """Rank configs by summed per-job normalized cost, lowest first."""
    try:
        test_jobs = test_jobs.complete_subset(strict=strict)
    except ValidationError as exc:
        raise SelectionError(str(exc)) from exc
    if not test_jobs.jobs:
        raise SelectionError("no applicable test jobs")

    terms: dict[int, list[float]] = {c.config_id: [] for c in test_jobs.configs}
    for job in test_jobs.jobs:
        row = cost_row(test_jobs, job.job_id, prices)
        cheapest = min(row.values())
        if cheapest <= 0:
            raise SelectionError("degenerate prices: normalization undefined")
        for config_id, cost in row.items():
            terms[config_id].append(cost / cheapest)

    scored = sorted(
        ((config_id, math.fsum(values)) for config_id, values in terms.items()),
        key=lambda entry: (entry[1], entry[0]),
    )
    return ConfigRanking(entries=tuple(scored), test_job_ids=test_jobs.job_ids)


def static_selection(policy: Policy, catalog: Iterable[CloudConfig]) -> int:
    """Resource-extreme baselines; ties go to the lowest config id."""
    keys = {
        Policy.MIN_CPU: lambda c: (c.total_cores, c.config_id),
        Policy.MAX_CPU: lambda c: (-c.total_cores, c.config_id),
        Policy.MIN_MEM: lambda c: (c.total_mem_gib, c.config_id),
        Policy.MAX_MEM: lambda c: (-c.total_mem_gib, c.config_id),
    }
    if policy not in keys:
        raise SelectionError(f"{policy.label} is not a static policy")
    catalog = tuple(catalog)
    if not catalog:
        raise SelectionError("empty configuration catalog")
    return min(catalog, key=keys[policy]).config_id


def select(
    policy: SelectionPolicy,
    job: JobSpec,
    trace: ProfilingTrace,
    prices: PriceModel,
    catalog: Iterable[CloudConfig] | None = None,
    *,
    job_class: JobClass | None = None,
    strict: bool = True,
) -> int:
    """Config id chosen by ``policy`` for ``job``.

    Ranking policies never see test jobs sharing ``job.algorithm``.
    ``job_class`` overrides the class the user assigned to ``job``, which
    only matters for :attr:`Policy.FLORA`.
    """
    if isinstance(policy, Replay):
        try:
            return policy.selections[job.job_id]
        except KeyError:
            raise SelectionError(f"replay {policy.name!r} has no selection for {job.job_id}") from None
    if policy is Policy.FLORA:
        target = job_class or job.job_class
        return rank_configurations(
            filter_test_jobs(trace, target, job.algorithm), prices, strict=strict
        ).selected
    if policy is Policy.FW1C:
        return rank_configurations(
            filter_test_jobs(trace, None, job.algorithm), prices, strict=strict
        ).selected
    if policy is Policy.RANDOM:
        raise SelectionError("expectation policy has no point selection")
    return static_selection(policy, trace.configs if catalog is None else catalog)


def load_replay(source: IO[str] | str | Path, name: str) -> Replay:
    """Read a ``job_id,config_id`` CSV into a :class:`Replay` policy."""
    reader = csv.reader(io.StringIO(_read_text(source), newline=""))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["job_id", "config_id"]:
        raise ParseError(f"replay fixture {name!r}: expected header job_id,config_id")
    selections: dict[str, int] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(f"replay fixture {name!r} row {line_no}: expected 2 fields")
        job_id, config_id = row[0].strip(), row[1].strip()
        if not config_id.isdigit():
            raise ParseError(f"replay fixture {name!r} row {line_no}: bad config_id {config_id!r}")
        if job_id in selections:
            raise ValidationError(f"replay fixture {name!r}: duplicate job {job_id}")
        selections[job_id] = int(config_id)
    return Replay(name, selections)
