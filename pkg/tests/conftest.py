import sys
import time
from pathlib import Path
from types import SimpleNamespace

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rigidsim import run
from rigidsim.scenario import parse_scenario


def _timed_run(name):
    scenario = parse_scenario(name)
    t0 = time.perf_counter()
    trace, log = run(scenario)
    elapsed = time.perf_counter() - t0
    return SimpleNamespace(scenario=scenario, trace=trace, log=log, elapsed=elapsed)


@pytest.fixture(scope="session")
def centralized_run():
    return _timed_run("paper-centralized")


@pytest.fixture(scope="session")
def distributed_run():
    return _timed_run("paper-distributed")


@pytest.fixture(scope="session")
def modified_run():
    return _timed_run("paper-modified")
