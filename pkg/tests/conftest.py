import numpy as np
import pytest

from swarm_attrition.optimizer import baseline_stationary
from swarm_attrition.scenario import ScenarioConfig, initial_state


def small_config(**changes) -> ScenarioConfig:
    base = ScenarioConfig(
        n_attackers=6,
        n_defenders=4,
        lambda_a=0.5,
        lambda_d=0.5,
        sigma_a=4.0,
        sigma_d=4.0,
        dt=0.1,
        n_steps=60,
        u_max=0.3,
    ).replace(layout={"attacker_radius": 10.0, "attacker_shell_width": 2.0, "defender_radius": 5.0,
                      "attacker_cone_deg": 40.0, "defender_cone_deg": 60.0})
    return base.replace(**changes)


def oracle_config(**changes) -> ScenarioConfig:
    """One static attacker within weapon range of the HVU, no defenders."""
    cfg = ScenarioConfig(
        n_attackers=1,
        n_defenders=0,
        leader_gain=0.0,
        lambda_a=0.5,
        sigma_a=4.0,
        dt=0.1,
        n_steps=40,
    ).replace(layout={"attacker_radius": 2.0, "attacker_shell_width": 0.0})
    return cfg.replace(**changes)


@pytest.fixture
def config():
    return small_config()


@pytest.fixture
def state(config):
    return initial_state(config)


@pytest.fixture
def stationary(config, state):
    return baseline_stationary(config, state)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: minutes-long acceptance reproductions")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
