import sys
from pathlib import Path

import pytest

from aic.surface import parse

PROGRAMS = Path(__file__).parent / "programs"


def load(name: str):
    return parse((PROGRAMS / f"{name}.aic").read_text(encoding="utf-8"))


@pytest.fixture
def program():
    return load


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
