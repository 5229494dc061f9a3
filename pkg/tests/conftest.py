import pytest
from hypothesis import HealthCheck, settings

from couette_lowmach.grid import Grid
from couette_lowmach.params import default_params

settings.register_profile(
    "repo", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def grid64():
    return Grid(64, 64)


@pytest.fixture(scope="session")
def grid16():
    return Grid(16, 16)


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])


@pytest.fixture
def verdict(request):
    """``verdict(n, passed, detail)`` records one line for the summary."""
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.acceptance_lines[number] = line
        print(line)
        return passed
    return record
