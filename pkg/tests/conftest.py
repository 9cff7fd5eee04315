from __future__ import annotations

import pytest

from flora.datasets import default_catalog
from flora.trace import CloudConfig, JobClass, JobSpec, ProfilingTrace, TraceRecord

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        properties = dict(report.user_properties)
        marker = properties.get("criterion")
        if marker:
            reason = properties.get("note", "")
            if report.skipped and isinstance(report.longrepr, tuple):
                reason = report.longrepr[2]
            _criteria[marker] = (report.outcome.upper(), reason)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("criterion")
    if marker:
        item.user_properties.append(("criterion", f"{marker.args[0]}. {marker.args[1]}"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: (int(n.split(".")[0]), n)):
        outcome, reason = _criteria[name]
        line = f"{outcome:<7} {name}"
        if reason:
            line += f"  [{reason.removeprefix('Skipped: ')}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def catalog() -> tuple[CloudConfig, ...]:
    return default_catalog()


def make_trace(
    runtimes: dict[str, dict[int, float]],
    configs: tuple[CloudConfig, ...],
    classes: dict[str, str] | None = None,
) -> ProfilingTrace:
    """Build a trace from ``{algorithm: {config_id: runtime}}`` (dataset size 1)."""
    classes = classes or {}
    jobs = []
    records = []
    for algorithm, row in runtimes.items():
        job = JobSpec(algorithm, 1.0, JobClass(classes.get(algorithm, "A")))
        jobs.append(job)
        for config_id, runtime in row.items():
            records.append(TraceRecord(job.job_id, config_id, runtime))
    return ProfilingTrace(configs=configs, jobs=tuple(jobs), records=tuple(records))


@pytest.fixture
def two_configs() -> tuple[CloudConfig, ...]:
    return (
        CloudConfig(1, "small", 2, 4, 16),
        CloudConfig(2, "large", 2, 4, 16),
    )
