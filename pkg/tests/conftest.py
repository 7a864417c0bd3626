import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[tuple[str, str, str]] = []


class _Criterion:
    def __init__(self, label: str):
        self.label = label
        self.detail = ""

    def note(self, text: str):
        self.detail = text

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            verdict = "PASS"
        elif issubclass(exc_type, pytest.skip.Exception):
            verdict, self.detail = "SKIP", str(exc)
        else:
            verdict = "FAIL"
            if not self.detail:
                self.detail = str(exc).splitlines()[0] if str(exc) else exc_type.__name__
        line = (verdict, self.label, self.detail)
        _ACCEPTANCE.append(line)
        print(f"[{verdict}] {self.label}: {self.detail}")
        return False


@pytest.fixture
def criterion():
    """``with criterion("3 tightness") as c:`` records one pass/fail line."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for verdict, label, detail in sorted(_ACCEPTANCE, key=lambda r: r[1]):
        terminalreporter.write_line(f"{verdict:4s}  criterion {label}  {detail}")
