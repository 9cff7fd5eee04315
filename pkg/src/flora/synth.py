"""Synthetic profiling traces from a parametric runtime model.

Runtime scales Amdahl-style with total cores. Memory-demanding jobs also
pay a cache-shortfall multiplier that falls linearly from
``cache_miss_penalty`` (nothing cached) to 1 (working set fits), so the
cost-optimal configuration of every synthetic job is known exactly.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Sequence

import numpy as np

from flora.errors import ParseError, ValidationError
from flora.trace import CloudConfig, JobClass, JobSpec, ProfilingTrace, TraceRecord


@dataclass(frozen=True)
class SynthJobParams:
    algorithm: str
    job_class: JobClass
    base_work_core_hours: float
    parallel_fraction: float = 1.0
    cache_need_gib: float = 0.0
    cache_miss_penalty: float = 1.0
    per_node_overhead_seconds: float = 0.0
    dataset_gib: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "job_class", JobClass(self.job_class))
        if not self.base_work_core_hours > 0:
            raise ValidationError(f"{self.algorithm}: base_work_core_hours must be > 0")
        if not 0.0 <= self.parallel_fraction <= 1.0:
            raise ValidationError(f"{self.algorithm}: parallel_fraction must lie in [0, 1]")
        if self.cache_need_gib < 0:
            raise ValidationError(f"{self.algorithm}: cache_need_gib must be >= 0")
        if self.cache_miss_penalty < 1:
            raise ValidationError(f"{self.algorithm}: cache_miss_penalty must be >= 1")
        if self.per_node_overhead_seconds < 0:
            raise ValidationError(f"{self.algorithm}: per_node_overhead_seconds must be >= 0")
        if self.job_class is JobClass.B and self.cache_need_gib != 0:
            raise ValidationError(f"{self.algorithm}: class B jobs have no cache need")

    @property
    def job(self) -> JobSpec:
        return JobSpec(self.algorithm, self.dataset_gib, self.job_class)

    def cache_penalty(self, total_mem_gib: float) -> float:
        if self.job_class is JobClass.B or self.cache_need_gib == 0:
            return 1.0
        cached = min(1.0, total_mem_gib / self.cache_need_gib)
        return 1.0 + (self.cache_miss_penalty - 1.0) * (1.0 - cached)

    def to_json(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["class"] = doc.pop("job_class").value
        return doc


def synth_runtime(params: SynthJobParams, config: CloudConfig) -> float:
    """Model runtime in seconds of ``params`` on ``config``."""
    scaling = (1.0 - params.parallel_fraction) + params.parallel_fraction / config.total_cores
    compute = 3600.0 * params.base_work_core_hours * scaling
    return (
        compute * params.cache_penalty(config.total_mem_gib)
        + config.node_count * params.per_node_overhead_seconds
    )


def _cell_rng(seed: int, job_id: str, config_id: int) -> np.random.Generator:
    # keyed by cell, so noise does not depend on generation order
    return np.random.default_rng([seed, zlib.crc32(job_id.encode("utf-8")), config_id])


def generate_trace(
    param_sets: Sequence[SynthJobParams],
    catalog: Iterable[CloudConfig],
    *,
    relative_sigma: float = 0.0,
    seed: int = 0,
    runs: int = 1,
) -> ProfilingTrace:
    """Complete trace of every job on every config, with optional log-normal noise."""
    catalog = tuple(catalog)
    if not param_sets or not catalog:
        raise ValidationError("synthetic trace needs at least one job and one config")
    if relative_sigma < 0:
        raise ValidationError("relative_sigma must be >= 0")
    if runs < 1:
        raise ValidationError("runs must be >= 1")

    records = []
    for params in param_sets:
        job_id = params.job.job_id
        for config in catalog:
            exact = synth_runtime(params, config)
            if relative_sigma == 0:
                noise = np.ones(runs)
            else:
                noise = np.exp(relative_sigma * _cell_rng(seed, job_id, config.config_id).standard_normal(runs))
            for run_index, factor in enumerate(noise):
                records.append(TraceRecord(job_id, config.config_id, float(exact * factor), run_index))
    return ProfilingTrace(
        configs=catalog,
        jobs=tuple(p.job for p in param_sets),
        records=tuple(records),
    )


def params_from_json(doc: Any) -> list[SynthJobParams]:
    if not isinstance(doc, dict) or not isinstance(doc.get("jobs"), list):
        raise ParseError('scenario must be a JSON object with a "jobs" list')
    params = []
    for i, entry in enumerate(doc["jobs"]):
        if not isinstance(entry, dict):
            raise ParseError(f"scenario job {i} is not an object")
        entry = dict(entry)
        try:
            entry["job_class"] = JobClass(entry.pop("class"))
        except KeyError:
            raise ValidationError(f"scenario job {i} has no class") from None
        except ValueError:
            raise ValidationError(f"scenario job {i}: class must be A or B") from None
        try:
            params.append(SynthJobParams(**entry))
        except TypeError as exc:
            raise ValidationError(f"scenario job {i}: {exc}") from None
    ids = [p.job.job_id for p in params]
    if len(set(ids)) != len(ids):
        raise ValidationError("scenario contains duplicate (algorithm, dataset_gib) jobs")
    return params


def load_scenario(source: IO[str] | str | Path) -> list[SynthJobParams]:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario is not valid JSON: {exc}") from exc
    return params_from_json(doc)


def scenario_to_json(params: Iterable[SynthJobParams]) -> str:
    return json.dumps({"jobs": [p.to_json() for p in params]}, indent=2) + "\n"
