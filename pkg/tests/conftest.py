import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from commoneval import _kernels  # noqa: E402

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture(params=sorted(_kernels.BACKENDS))
def backend(request):
    return request.param


@pytest.fixture
def record():
    """``record(key, ok, detail)`` logs one acceptance line and returns ``ok``."""

    def _record(key, ok, detail=""):
        ACCEPTANCE_RESULTS[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int("".join(c for c in k if c.isdigit()) or 0), k)):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")
