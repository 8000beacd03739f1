import importlib.resources
import time
from dataclasses import replace

import pytest

from formsim.scenario import load_scenario
from formsim.simulate import run
from formsim.vessel import VesselParams


@pytest.fixture(scope="session")
def default_params() -> VesselParams:
    ref = importlib.resources.files("formsim").joinpath("data/default_vessel.json")
    return VesselParams.from_json(str(ref))


@pytest.fixture(scope="session")
def sin300_scenario():
    return load_scenario("sin300")


@pytest.fixture(scope="session")
def sin300_run(sin300_scenario):
    """Full-horizon adaptive reference run, shared across test modules."""
    t0 = time.monotonic()
    log = run(sin300_scenario.config)
    elapsed = time.monotonic() - t0
    assert log.completed, log.failure
    return log, elapsed


@pytest.fixture(scope="session")
def sin300_baseline_run(sin300_scenario):
    cfg = replace(sin300_scenario.config, autopilot_mode="baseline")
    t0 = time.monotonic()
    log = run(cfg)
    elapsed = time.monotonic() - t0
    assert log.completed, log.failure
    return log, elapsed
