import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


def pytest_addoption(parser):
    parser.addoption("--run-heavy", action="store_true", default=False, help="run tests that take hours")


def pytest_configure(config):
    config.addinivalue_line("markers", "standard: takes minutes rather than seconds")
    config.addinivalue_line("markers", "heavy: takes hours; enable with --run-heavy or NAMBUFLOW_HEAVY=1")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-heavy") or os.environ.get("NAMBUFLOW_HEAVY") == "1":
        return
    skip_heavy = pytest.mark.skip(reason="heavy tier; pass --run-heavy or set NAMBUFLOW_HEAVY=1")
    for item in items:
        if "heavy" in item.keywords:
            item.add_marker(skip_heavy)
