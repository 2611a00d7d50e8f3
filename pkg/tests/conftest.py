import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"

os.environ.setdefault("ULANG_CORPUS", str(CORPUS))
os.environ.setdefault("UL_COLOR", "0")


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


ACCEPTANCE: dict = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    """Remember one acceptance line; they are printed together at the end of the session."""
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
