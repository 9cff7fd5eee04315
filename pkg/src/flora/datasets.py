"""Packaged reference data: the ten-config catalog, job list and replay fixtures."""

from __future__ import annotations

import csv
import io
from importlib import resources

from flora.selector import Replay, load_replay
from flora.trace import CloudConfig, JobClass, JobSpec, ingest_configs

REPLAY_FIXTURES = {"Crispy": "replay_crispy.csv", "Juggler": "replay_juggler.csv"}


def _text(name: str) -> str:
    return resources.files("flora").joinpath("data", name).read_text(encoding="utf-8")


def default_catalog() -> tuple[CloudConfig, ...]:
    return ingest_configs(io.StringIO(_text("configs.csv")))


def reference_jobs() -> tuple[JobSpec, ...]:
    """The 18 profiled jobs with their class labels."""
    rows = csv.DictReader(io.StringIO(_text("jobs.csv")))
    return tuple(
        JobSpec(row["algorithm"], float(row["dataset_gib"]), JobClass(row["class"])) for row in rows
    )


def replay_fixture(name: str) -> Replay:
    try:
        filename = REPLAY_FIXTURES[name]
    except KeyError:
        raise KeyError(f"no packaged replay fixture {name!r}; have {', '.join(REPLAY_FIXTURES)}") from None
    return load_replay(io.StringIO(_text(filename)), name)


def default_scenario_text() -> str:
    return _text("synth_scenario.json")
