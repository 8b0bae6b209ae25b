import logging
import os

# Several workers even on a single-core box, so the parallel paths really split
# work. Must be set before numba is first imported.
os.environ.setdefault("NUMBA_NUM_THREADS", "4")

import pytest  # noqa: E402

from _data import ACCEPTANCE_LINES  # noqa: E402

logging.getLogger("blocksim").setLevel(logging.ERROR)


@pytest.fixture(autouse=True)
def _quiet_angle_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="blocksim.circuit")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
