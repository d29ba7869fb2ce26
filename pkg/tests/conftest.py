import pytest

from microgrid_sla.loads import ApplianceSpec, EventTrace, OperationState
from microgrid_sla.scenario import ScenarioConfig, reference_scenario


@pytest.fixture(scope="session")
def reference():
    return reference_scenario()


def tiny_scenario(**kw) -> ScenarioConfig:
    """Two-hour scenario with one traced 500 W appliance starting at 08:30."""
    base = dict(
        appliances=(ApplianceSpec("heater", (OperationState(500, 900),), psi=1.0,
                                  usage=EventTrace((1420101000,))),),
        start_second=8 * 3600,
        sim_length=7200,
        seed=7,
    )
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def tiny():
    return tiny_scenario()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
