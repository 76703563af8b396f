import os

import pytest

# acceptance verdicts collected by test_acceptance.py, echoed in the terminal summary
VERDICTS: dict[int, str] = {}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("AGHETNET_SLOW"):
        return
    skip = pytest.mark.skip(reason="long-running; set AGHETNET_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
