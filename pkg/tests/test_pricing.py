import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flora.errors import ParseError, ValidationError
from flora.pricing import (
    CatalogPrices,
    LinearPrices,
    catalog_from_linear,
    execution_cost,
    hourly_cost,
    ingest_price_snapshot,
    model_from_ratio,
)
from flora.trace import CloudConfig

CONFIG_2 = CloudConfig(2, "n2-standard-8", 8, 8, 32)
GCP_LIKE = LinearPrices(cpu_core_hour=0.03, mem_gib_hour=0.004)


def test_hourly_cost_linear():
    # 8 * (8 * 0.03 + 32 * 0.004) = 8 * 0.368
    assert hourly_cost(CONFIG_2, GCP_LIKE) == pytest.approx(2.944)


def test_zero_prices_cost_nothing(catalog):
    zero = LinearPrices(0, 0, 0)
    assert zero.degenerate
    assert all(hourly_cost(c, zero) == 0 for c in catalog)


def test_equal_totals_equal_cost(catalog):
    by_id = {c.config_id: c for c in catalog}
    assert hourly_cost(by_id[5], GCP_LIKE) == pytest.approx(hourly_cost(by_id[8], GCP_LIKE))


def test_node_base_breaks_equal_totals(catalog):
    by_id = {c.config_id: c for c in catalog}
    prices = LinearPrices(0.03, 0.004, node_hour_base=0.01)
    assert hourly_cost(by_id[8], prices) - hourly_cost(by_id[5], prices) == pytest.approx(4 * 0.01)


def test_catalog_cost():
    prices = CatalogPrices({"n2-standard-8": 0.5})
    assert hourly_cost(CONFIG_2, prices) == 4.0


def test_catalog_missing_type_named():
    with pytest.raises(ValidationError, match="n2-standard-8"):
        hourly_cost(CONFIG_2, CatalogPrices({"n2-highmem-8": 1.0}))


def test_execution_cost_one_hour():
    assert execution_cost(3600, CONFIG_2, GCP_LIKE) == pytest.approx(2.944)


def test_execution_cost_half_hour():
    assert execution_cost(1800, CONFIG_2, GCP_LIKE) == pytest.approx(1.472)


@pytest.mark.parametrize("runtime", [0, -1])
def test_execution_cost_requires_positive_runtime(runtime):
    with pytest.raises(ValidationError):
        execution_cost(runtime, CONFIG_2, GCP_LIKE)


@pytest.mark.parametrize(
    "ratio, anchor, expected",
    [(0.01, 1.0, (1.0, 0.01)), (10, 1.0, (1.0, 10.0)), (1, 2.0, (2.0, 2.0))],
)
def test_model_from_ratio(ratio, anchor, expected):
    model = model_from_ratio(ratio, anchor)
    assert (model.cpu_core_hour, model.mem_gib_hour, model.node_hour_base) == pytest.approx((*expected, 0))


@pytest.mark.parametrize("ratio, anchor", [(0, 1), (-1, 1), (1, 0), (1, -2)])
def test_model_from_ratio_rejects_non_positive(ratio, anchor):
    with pytest.raises(ValidationError):
        model_from_ratio(ratio, anchor)


class TestSnapshot:
    def test_linear(self):
        model = ingest_price_snapshot(
            io.StringIO('{"model":"linear","cpu_core_hour":0.03,"mem_gib_hour":0.004,"node_hour_base":0}')
        )
        assert model == LinearPrices(0.03, 0.004, 0)

    def test_catalog_with_as_of(self):
        model = ingest_price_snapshot(
            io.StringIO('{"model":"catalog","per_instance_hour":{"n2-standard-8":0.5},"as_of":"2024-12-01"}')
        )
        assert isinstance(model, CatalogPrices)
        assert model.per_instance_hour == {"n2-standard-8": 0.5}
        assert model.as_of == "2024-12-01"

    def test_empty_catalog(self):
        with pytest.raises(ValidationError, match="empty catalog"):
            ingest_price_snapshot(io.StringIO('{"model":"catalog","per_instance_hour":{}}'))

    def test_unknown_model(self):
        with pytest.raises(ValidationError, match="unknown price model"):
            ingest_price_snapshot(io.StringIO('{"model":"spot"}'))

    def test_negative_rate(self):
        with pytest.raises(ValidationError, match="negative"):
            ingest_price_snapshot(io.StringIO('{"model":"linear","cpu_core_hour":-1,"mem_gib_hour":0}'))

    def test_all_zero_linear_rejected(self):
        with pytest.raises(ValidationError, match="positive rate"):
            ingest_price_snapshot(io.StringIO('{"model":"linear","cpu_core_hour":0,"mem_gib_hour":0}'))

    def test_not_json(self):
        with pytest.raises(ParseError):
            ingest_price_snapshot(io.StringIO("cpu=1"))

    def test_json_round_trip(self):
        import json

        for model in (LinearPrices(0.03, 0.004, as_of="2024-12-01"), CatalogPrices({"a": 1.5})):
            assert ingest_price_snapshot(io.StringIO(json.dumps(model.to_json()))) == model


def test_catalog_from_linear_matches(catalog):
    table = catalog_from_linear(GCP_LIKE, catalog)
    for config in catalog:
        assert hourly_cost(config, table) == pytest.approx(hourly_cost(config, GCP_LIKE))


rates = st.floats(0, 10, allow_nan=False)
positive = st.floats(0.01, 100, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(cpu=rates, mem=rates, base=rates, scale=positive, runtime=st.floats(1, 1e5))
def test_positive_homogeneity(catalog, cpu, mem, base, scale, runtime):
    prices = LinearPrices(cpu, mem, base)
    for config in catalog:
        assert hourly_cost(config, prices.scaled(scale)) == pytest.approx(scale * hourly_cost(config, prices))
        assert execution_cost(runtime, config, prices.scaled(scale)) == pytest.approx(
            scale * execution_cost(runtime, config, prices)
        )


@settings(max_examples=100, deadline=None)
@given(cpu=rates, mem=rates, runtime=st.floats(1, 1e5), factor=st.floats(0.1, 10))
def test_cost_depends_on_totals_only(catalog, cpu, mem, runtime, factor):
    prices = LinearPrices(cpu, mem)
    by_totals = {}
    for config in catalog:
        by_totals.setdefault((config.total_cores, config.total_mem_gib), []).append(hourly_cost(config, prices))
    for costs in by_totals.values():
        assert costs == pytest.approx([costs[0]] * len(costs))
    config = catalog[0]
    assert execution_cost(runtime * factor, config, prices) == pytest.approx(
        factor * execution_cost(runtime, config, prices)
    )
