from __future__ import annotations

import sys

import pytest

from entropix.chain import preset


@pytest.fixture(scope="session")
def constant():
    return preset("constant")


@pytest.fixture(scope="session")
def step_J():
    return preset("step_J")


@pytest.fixture(scope="session")
def periodic2():
    return preset("periodic2")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    RESULTS = getattr(module, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        crit = RESULTS[number]
        terminalreporter.write_line(crit.summary_line())
        for line in crit.clause_lines():
            terminalreporter.write_line("    " + line)
