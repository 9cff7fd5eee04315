import io
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flora.errors import ParseError, ValidationError
from flora.pricing import LinearPrices
from flora.trace import (
    CloudConfig,
    JobClass,
    configs_to_csv,
    ingest_configs,
    ingest_trace,
    trace_statistics,
)

HEADER = "algorithm,dataset_gib,class,config_id,runtime_seconds,run_index\n"
CONFIG_HEADER = "config_id,instance_type,node_count,cores_per_node,mem_gib_per_node\n"


def trace_csv(rows):
    return io.StringIO(HEADER + "".join(",".join(map(str, r)) + "\n" for r in rows))


class TestIngestConfigs:
    def test_standard_8_totals(self):
        (config,) = ingest_configs(io.StringIO(CONFIG_HEADER + "2,n2-standard-8,8,8,32\n"))
        assert config.total_cores == 64
        assert config.total_mem_gib == 256

    def test_highcpu_8_memory(self):
        (config,) = ingest_configs(io.StringIO(CONFIG_HEADER + "1,n2-highcpu-8,8,8,8\n"))
        assert config.total_mem_gib == 64

    def test_zero_nodes_rejected(self):
        with pytest.raises(ValidationError, match="non-positive node_count"):
            ingest_configs(io.StringIO(CONFIG_HEADER + "1,x,0,8,8\n"))

    def test_duplicate_id_named(self):
        with pytest.raises(ValidationError, match="duplicate config_id 3"):
            ingest_configs(io.StringIO(CONFIG_HEADER + "3,a,1,1,1\n3,b,2,2,2\n"))

    def test_row_order_irrelevant(self):
        rows = ["2,b,2,2,2\n", "1,a,1,1,1\n"]
        forward = ingest_configs(io.StringIO(CONFIG_HEADER + "".join(rows)))
        backward = ingest_configs(io.StringIO(CONFIG_HEADER + "".join(reversed(rows))))
        assert forward == backward

    def test_crlf_accepted(self):
        text = CONFIG_HEADER.replace("\n", "\r\n") + "1,a,1,2,3.5\r\n"
        (config,) = ingest_configs(io.StringIO(text))
        assert config.mem_gib_per_node == 3.5

    @pytest.mark.parametrize("value", ["1,000", "1_0", "nan", "inf", "eight"])
    def test_rejects_non_decimal_numbers(self, value):
        with pytest.raises(ParseError):
            ingest_configs(io.StringIO(CONFIG_HEADER + f'1,a,"{value}",1,1\n'))

    def test_bad_header(self):
        with pytest.raises(ParseError, match="header"):
            ingest_configs(io.StringIO("id,type\n1,a\n"))

    def test_packaged_catalog(self, catalog):
        assert [c.config_id for c in catalog] == list(range(1, 11))
        totals = {c.config_id: (c.total_cores, c.total_mem_gib) for c in catalog}
        assert totals == {
            1: (64, 64),
            2: (64, 256),
            3: (64, 512),
            4: (16, 128),
            5: (32, 128),
            6: (128, 128),
            7: (16, 128),
            8: (32, 128),
            9: (64, 256),
            10: (128, 128),
        }

    def test_round_trip(self, catalog):
        assert ingest_configs(io.StringIO(configs_to_csv(catalog))) == catalog


class TestIngestTrace:
    def test_median_of_three(self, catalog):
        rows = [("Sort", 94, "A", 1, rt, i) for i, rt in enumerate((100, 300, 200))]
        trace = ingest_trace(trace_csv(rows), catalog[:1])
        assert trace.runtime("Sort/94", 1) == 200

    def test_even_median_is_midpoint(self, catalog):
        rows = [("Sort", 94, "A", 1, rt, i) for i, rt in enumerate((100, 400, 200, 300))]
        trace = ingest_trace(trace_csv(rows), catalog[:1])
        assert trace.runtime("Sort/94", 1) == 250

    def test_inconsistent_class(self, catalog):
        rows = [("Sort", 188, "A", 1, 10, 0), ("Sort", 188, "B", 1, 12, 1)]
        with pytest.raises(ValidationError, match="inconsistent class"):
            ingest_trace(trace_csv(rows), catalog[:1])

    def test_unknown_config(self, catalog):
        with pytest.raises(ValidationError, match="unknown config_id 11"):
            ingest_trace(trace_csv([("Sort", 94, "A", 11, 10, 0)]), catalog)

    @pytest.mark.parametrize("runtime", [0, -5])
    def test_non_positive_runtime(self, catalog, runtime):
        with pytest.raises(ValidationError, match="runtime"):
            ingest_trace(trace_csv([("Sort", 94, "A", 1, runtime, 0)]), catalog[:1])

    def test_bad_class_label(self, catalog):
        with pytest.raises(ParseError, match="class"):
            ingest_trace(trace_csv([("Sort", 94, "C", 1, 10, 0)]), catalog[:1])

    def test_duplicate_run_index(self, catalog):
        rows = [("Sort", 94, "A", 1, 10, 0), ("Sort", 94, "A", 1, 11, 0)]
        with pytest.raises(ValidationError, match="duplicate record"):
            ingest_trace(trace_csv(rows), catalog[:1])

    def test_jobs_deduplicated(self, catalog):
        rows = [("Sort", 94, "A", c.config_id, 10, 0) for c in catalog[:3]]
        rows += [("Sort", 188, "A", c.config_id, 20, 0) for c in catalog[:3]]
        trace = ingest_trace(trace_csv(rows), catalog[:3])
        assert trace.job_ids == ("Sort/188", "Sort/94")
        assert trace.job("Sort/94").job_class is JobClass.A
        assert trace.is_complete

    def test_strict_rejects_missing_cell(self, catalog):
        rows = [("Sort", 94, "A", 1, 10, 0)]
        with pytest.raises(ValidationError, match="Sort/94@#2"):
            ingest_trace(trace_csv(rows), catalog[:2])

    def test_lenient_keeps_holes(self, catalog, caplog):
        rows = [("Sort", 94, "A", 1, 10, 0), ("Grep", 10, "B", 1, 5, 0), ("Grep", 10, "B", 2, 6, 0)]
        trace = ingest_trace(trace_csv(rows), catalog[:2], strict=False)
        assert trace.missing_cells() == [("Sort/94", 2)]
        assert "missing cells" in caplog.text
        assert trace.complete_subset(strict=False).job_ids == ("Grep/10",)

    def test_any_run_index_accepted(self, catalog):
        trace = ingest_trace(trace_csv([("Sort", 94, "A", 1, 10, 7)]), catalog[:1])
        assert trace.runtime("Sort/94", 1) == 10

    def test_fractional_dataset_size_job_id(self, catalog):
        trace = ingest_trace(trace_csv([("Sort", 0.5, "A", 1, 10, 0)]), catalog[:1])
        assert trace.job_ids == ("Sort/0.5",)

    def test_round_trip(self, catalog):
        rows = [
            ("Word Count", 39, "B", c.config_id, 100.0 + 7.25 * c.config_id + run, run)
            for c in catalog
            for run in range(3)
        ]
        trace = ingest_trace(trace_csv(rows), catalog)
        again = ingest_trace(io.StringIO(trace.to_csv()), catalog)
        assert dict(again.aggregated_runtime) == dict(trace.aggregated_runtime)


@settings(max_examples=60, deadline=None)
@given(
    runtimes=st.lists(st.floats(0.01, 1e5, allow_nan=False), min_size=1, max_size=9),
    data=st.data(),
)
def test_median_permutation_invariant(runtimes, data):
    config = CloudConfig(1, "a", 1, 1, 1)
    order = data.draw(st.permutations(range(len(runtimes))))
    rows = lambda perm: [("J", 1, "A", 1, repr(runtimes[i]), run) for run, i in enumerate(perm)]
    a = ingest_trace(trace_csv(rows(range(len(runtimes)))), [config])
    b = ingest_trace(trace_csv(rows(order)), [config])
    assert a.runtime("J/1", 1) == b.runtime("J/1", 1) == statistics.median(runtimes)


class TestStatistics:
    def test_known_sample(self, catalog):
        config = catalog[0]  # 8 nodes x 8 cores x 8 GiB
        rows = [(f"J{i}", 1, "A", 1, rt, 0) for i, rt in enumerate((3600, 7200, 10800, 14400))]
        trace = ingest_trace(trace_csv(rows), [config])
        prices = LinearPrices(cpu_core_hour=1 / 64, mem_gib_hour=0)  # 1 per cluster-hour
        stats = trace_statistics(trace, prices)
        assert stats.runtime.mean == 9000
        assert stats.runtime.std == pytest.approx(statistics.stdev([3600, 7200, 10800, 14400]))
        assert stats.runtime.q25 == pytest.approx(6300)  # linear interpolation
        assert stats.runtime.q75 == pytest.approx(11700)
        assert (stats.cost.min, stats.cost.mean, stats.cost.max) == pytest.approx((1, 2.5, 4))
        assert stats.cells == 4

    def test_single_cell_flags_std(self, catalog):
        trace = ingest_trace(trace_csv([("J", 1, "A", 1, 50, 0)]), catalog[:1])
        stats = trace_statistics(trace, LinearPrices(1, 0))
        assert stats.runtime.std == 0 and stats.degenerate
        assert "std_undefined,1" in stats.to_csv()

    def test_incomplete_trace_lists_cells(self, catalog):
        trace = ingest_trace(trace_csv([("J", 1, "A", 1, 50, 0)]), catalog[:2], strict=False)
        with pytest.raises(ValidationError, match="J/1@#2"):
            trace_statistics(trace, LinearPrices(1, 0))

    def test_csv_layout(self, catalog):
        rows = [("J", 1, "A", c.config_id, 100 * c.config_id, 0) for c in catalog[:2]]
        text = trace_statistics(ingest_trace(trace_csv(rows), catalog[:2]), LinearPrices(1, 0)).to_csv()
        lines = text.splitlines()
        assert lines[0] == "metric,value"
        assert "runtime_mean,150.000" in lines
        assert "runtime_max,200.000" in lines
