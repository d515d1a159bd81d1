import numpy as np
import pytest

from pvtwin.config import load_config
from pvtwin.pvcore import InverterParams, ModuleParams


@pytest.fixture(scope="session")
def module():
    return ModuleParams.load()


@pytest.fixture(scope="session")
def inverter():
    return InverterParams.load("inverter_trio_50")


@pytest.fixture(scope="session")
def ref_config():
    return load_config()


@pytest.fixture(scope="session")
def system_a(ref_config):
    return ref_config.system("A")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
