from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=30)
settings.load_profile("default")

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """record(n, ok, detail): one entry per check; a criterion passes only if all its checks do."""
    def record(n, ok, detail):
        _CRITERIA.setdefault(n, []).append((bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        checks = _CRITERIA[n]
        ok = all(c for c, _ in checks)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  " + "; ".join(d for _, d in checks))
