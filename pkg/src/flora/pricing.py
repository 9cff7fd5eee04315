"""Hourly price models and execution-cost computation.

Two shapes of price model are supported. :class:`LinearPrices` charges per
vCPU-hour, per GiB-hour and optionally per node-hour. :class:`CatalogPrices`
charges a fixed hourly rate per instance type, which is the natural shape of
a spot-price snapshot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import IO, TYPE_CHECKING, Any, Mapping, Union

from flora.errors import ParseError, ValidationError

if TYPE_CHECKING:
    from flora.trace import CloudConfig


def _check_rate(name: str, value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    if not math.isfinite(value) or value < 0:
        raise ValidationError(f"negative or non-finite rate {name}={value!r}")
    return float(value)


@dataclass(frozen=True)
class LinearPrices:
    cpu_core_hour: float
    mem_gib_hour: float
    node_hour_base: float = 0.0
    as_of: str | None = None

    def __post_init__(self) -> None:
        for name in ("cpu_core_hour", "mem_gib_hour", "node_hour_base"):
            object.__setattr__(self, name, _check_rate(name, getattr(self, name)))

    @property
    def degenerate(self) -> bool:
        """All rates zero, so every configuration is free."""
        return self.cpu_core_hour == self.mem_gib_hour == self.node_hour_base == 0

    @property
    def memory_cpu_ratio(self) -> float:
        return self.mem_gib_hour / self.cpu_core_hour

    def node_hour(self, config: CloudConfig) -> float:
        return (
            config.cores_per_node * self.cpu_core_hour
            + config.mem_gib_per_node * self.mem_gib_hour
            + self.node_hour_base
        )

    def scaled(self, factor: float) -> LinearPrices:
        return LinearPrices(
            self.cpu_core_hour * factor,
            self.mem_gib_hour * factor,
            self.node_hour_base * factor,
            as_of=self.as_of,
        )

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "model": "linear",
            "cpu_core_hour": self.cpu_core_hour,
            "mem_gib_hour": self.mem_gib_hour,
            "node_hour_base": self.node_hour_base,
        }
        if self.as_of is not None:
            doc["as_of"] = self.as_of
        return doc


@dataclass(frozen=True)
class CatalogPrices:
    per_instance_hour: Mapping[str, float] = field(default_factory=dict)
    as_of: str | None = None

    def __post_init__(self) -> None:
        if not self.per_instance_hour:
            raise ValidationError("empty catalog")
        rates = {}
        for instance_type, rate in sorted(self.per_instance_hour.items()):
            rate = _check_rate(f"per_instance_hour[{instance_type}]", rate)
            if rate == 0:
                raise ValidationError(f"non-positive rate for instance type {instance_type}")
            rates[instance_type] = rate
        object.__setattr__(self, "per_instance_hour", MappingProxyType(rates))

    @property
    def degenerate(self) -> bool:
        return False

    def node_hour(self, config: CloudConfig) -> float:
        try:
            return self.per_instance_hour[config.instance_type]
        except KeyError:
            raise ValidationError(
                f"price catalog has no entry for instance type {config.instance_type!r}"
            ) from None

    def scaled(self, factor: float) -> CatalogPrices:
        return CatalogPrices(
            {k: v * factor for k, v in self.per_instance_hour.items()}, as_of=self.as_of
        )

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"model": "catalog", "per_instance_hour": dict(self.per_instance_hour)}
        if self.as_of is not None:
            doc["as_of"] = self.as_of
        return doc


PriceModel = Union[LinearPrices, CatalogPrices]


def hourly_cost(config: CloudConfig, prices: PriceModel) -> float:
    """Cluster cost per hour: node count times the per-node rate."""
    return config.node_count * prices.node_hour(config)


def execution_cost(runtime_seconds: float, config: CloudConfig, prices: PriceModel) -> float:
    if not runtime_seconds > 0:
        raise ValidationError(f"runtime_seconds must be > 0, got {runtime_seconds!r}")
    return runtime_seconds / 3600.0 * hourly_cost(config, prices)


def model_from_ratio(ratio: float, cpu_core_hour_anchor: float = 1.0) -> LinearPrices:
    """Linear model where one GiB-hour costs ``ratio`` core-hours."""
    if not ratio > 0 or not math.isfinite(ratio):
        raise ValidationError(f"price ratio must be > 0, got {ratio!r}")
    if not cpu_core_hour_anchor > 0 or not math.isfinite(cpu_core_hour_anchor):
        raise ValidationError(f"cpu_core_hour anchor must be > 0, got {cpu_core_hour_anchor!r}")
    return LinearPrices(
        cpu_core_hour=cpu_core_hour_anchor,
        mem_gib_hour=ratio * cpu_core_hour_anchor,
        node_hour_base=0.0,
    )


def catalog_from_linear(prices: LinearPrices, configs: Any) -> CatalogPrices:
    """Per-instance catalog that charges exactly what ``prices`` would."""
    rates: dict[str, float] = {}
    for config in configs:
        rate = prices.node_hour(config)
        previous = rates.setdefault(config.instance_type, rate)
        if previous != rate:
            raise ValidationError(f"instance type {config.instance_type} has inconsistent shapes")
    return CatalogPrices(rates, as_of=prices.as_of)


def price_model_from_json(doc: Any) -> PriceModel:
    if not isinstance(doc, dict):
        raise ParseError("price snapshot must be a JSON object")
    as_of = doc.get("as_of")
    if as_of is not None and not isinstance(as_of, str):
        raise ValidationError("as_of must be a string")
    model = doc.get("model")
    if model == "linear":
        try:
            prices = LinearPrices(
                cpu_core_hour=doc["cpu_core_hour"],
                mem_gib_hour=doc["mem_gib_hour"],
                node_hour_base=doc.get("node_hour_base", 0.0),
                as_of=as_of,
            )
        except KeyError as exc:
            raise ValidationError(f"linear price model missing {exc.args[0]}") from None
        if prices.degenerate:
            raise ValidationError("linear price model needs at least one positive rate")
        return prices
    if model == "catalog":
        table = doc.get("per_instance_hour")
        if not isinstance(table, dict):
            raise ValidationError("catalog price model needs a per_instance_hour object")
        return CatalogPrices(table, as_of=as_of)
    raise ValidationError(f"unknown price model {model!r}")


def ingest_price_snapshot(source: IO[str] | str | Path) -> PriceModel:
    """Parse a JSON price snapshot (linear or per-instance catalog)."""
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, (str, Path)) else source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"price snapshot is not valid JSON: {exc}") from exc
    return price_model_from_json(doc)
