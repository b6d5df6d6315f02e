import os
import sys

import gmpy2
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("ehs", deadline=None, max_examples=40)
settings.load_profile("ehs")


def relative(frame, x, y):
    """Symmetric relative difference at the frame's working precision, as float."""
    with frame.context():
        x, y = frame.value(x), frame.value(y)
        s = abs(x) + abs(y)
        return float(abs(x - y) / s) if s else 0.0


def bits(k):
    return 2.0 ** -k


@pytest.fixture
def mpc():
    return gmpy2.mpc


ACCEPTANCE: list[str] = []


def record(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
