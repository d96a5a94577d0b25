from pathlib import Path

import pytest

from ctmctails.parser import parse_file

FIXTURES = Path(__file__).parent / "fixtures"


def load(name: str):
    return parse_file(FIXTURES / name)


@pytest.fixture
def fixture_path():
    return lambda name: str(FIXTURES / name)


# acceptance verdicts, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
