import warnings

import pytest

from ecdsynth.fock import TruncationWarning

_ACCEPTANCE = {}


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        yield


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; repeated in the terminal summary."""
    def _report(num: int, ok: bool, detail: str):
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE[num] = line
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
