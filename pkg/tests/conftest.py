from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

REPO = Path(__file__).resolve().parents[1]


@pytest.fixture
def repo() -> Path:
    return REPO


_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Records one PASS/FAIL line per acceptance criterion; lines are echoed at the end of the run."""

    class Verdict:
        def __call__(self, number: int, title: str, check):
            try:
                detail = check()
            except BaseException as exc:
                line = f"FAIL criterion {number}: {title} ({type(exc).__name__}: {exc})"
                print(line)
                _ACCEPTANCE.append(line)
                raise
            line = f"PASS criterion {number}: {title}" + (f" ({detail})" if detail else "")
            print(line)
            _ACCEPTANCE.append(line)

    return Verdict()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda l: int(l.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
