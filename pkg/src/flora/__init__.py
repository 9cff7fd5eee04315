"""Cost-optimized cloud cluster configuration selection via job classification."""

from flora.errors import FloraError, ParseError, SelectionError, ValidationError
from flora.pricing import (
    CatalogPrices,
    LinearPrices,
    PriceModel,
    execution_cost,
    hourly_cost,
    ingest_price_snapshot,
    model_from_ratio,
)
from flora.selector import (
    ConfigRanking,
    Policy,
    Replay,
    filter_test_jobs,
    rank_configurations,
    select,
)
from flora.trace import (
    CloudConfig,
    JobClass,
    JobSpec,
    ProfilingTrace,
    TraceRecord,
    ingest_configs,
    ingest_trace,
    trace_statistics,
)

__all__ = [
    "CatalogPrices",
    "CloudConfig",
    "ConfigRanking",
    "FloraError",
    "JobClass",
    "JobSpec",
    "LinearPrices",
    "ParseError",
    "Policy",
    "PriceModel",
    "ProfilingTrace",
    "Replay",
    "SelectionError",
    "TraceRecord",
    "ValidationError",
    "execution_cost",
    "filter_test_jobs",
    "hourly_cost",
    "ingest_configs",
    "ingest_price_snapshot",
    "ingest_trace",
    "model_from_ratio",
    "rank_configurations",
    "select",
    "trace_statistics",
]
