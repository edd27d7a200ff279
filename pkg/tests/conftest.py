import time

import pytest

from divisor import families

ACCEPTANCE_LINES = []
_START = time.perf_counter()


@pytest.fixture(scope="session")
def nu():
    return families.nu(0.5)


@pytest.fixture(scope="session")
def mu():
    return families.mu(0.5)


@pytest.fixture(scope="session")
def report_line():
    """Record a one-line acceptance verdict; all lines are printed in the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
        terminalreporter.write_line(f"session runtime: {time.perf_counter() - _START:.1f} s")
