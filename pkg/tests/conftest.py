"""Shared test plumbing: the acceptance-criteria recorder.

test_acceptance.py registers one verdict per criterion; after the run a
summary section prints one PASS/FAIL line for each so the outcome can be
read without digging through pytest tracebacks.
"""

import pytest

CRITERIA = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8")
RESULTS = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record a criterion verdict, then assert it."""

    def check(name, passed, detail=""):
        RESULTS[name] = (bool(passed), detail)
        assert passed, f"{name} failed: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in CRITERIA:
        if name in RESULTS:
            passed, detail = RESULTS[name]
            status = "PASS" if passed else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        suffix = f"  {detail}" if detail else ""
        terminalreporter.write_line(f"{name}: {status}{suffix}")
