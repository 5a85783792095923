from pathlib import Path

import pytest

from fedmesh.net_model import load_network

FIXTURES = Path(__file__).parent / "fixtures"

# Lines reported by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def triangle_net():
    return load_network(FIXTURES / "triangle.json")


@pytest.fixture(scope="session")
def gaia_net():
    return load_network(FIXTURES / "gaia11.json")


@pytest.fixture(scope="session")
def hetero_net():
    return load_network(FIXTURES / "hetero11.json")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
