import json
from importlib import resources

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ncrat.pencil import LinearPencil

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large])
settings.load_profile("default")


def load_fixture(name: str) -> dict:
    return json.loads(resources.files("ncrat.data").joinpath(name + ".json").read_text())


def load_pencil(name: str) -> LinearPencil:
    return LinearPencil.from_json(load_fixture(name))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def expressions():
    return load_fixture("expressions")


_criteria: dict[str, tuple[str, float]] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, (outcome, duration) in sorted(_criteria.items(),
                                            key=lambda kv: _criterion_key(kv[0])):
        label = name[len("test_criterion_"):]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {label}: {verdict} ({duration:.2f}s)")


def _criterion_key(name):
    head = name[len("test_criterion_"):].split("_", 1)[0]
    digits = "".join(ch for ch in head if ch.isdigit())
    return (int(digits or 0), head)
