from importlib import resources
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "dualgain", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("dualgain")

SCENARIOS = Path(str(resources.files("dualgain").joinpath("scenarios")))

# filled by tests/test_acceptance.py, printed at the end of the session
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def scenario_path():
    def get(name: str) -> Path:
        return SCENARIOS / f"{name}.json"

    return get


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"Criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
