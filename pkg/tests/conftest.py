import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for o in results:
        terminalreporter.write_line(o.line())
    failed = sum(not o.passed for o in results)
    terminalreporter.write_line(f"{len(results) - failed} passed, {failed} failed")
