import time

import pytest

_TIMES = {}
_OUTCOMES = {}


@pytest.fixture
def criterion(request):
    """Times an acceptance check; exceeding the runtime limit fails it."""
    label, limit = request.node.get_closest_marker("acceptance").args
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    _TIMES[request.node.nodeid] = (label, limit, elapsed)
    assert elapsed < limit, f"{label}: {elapsed:.1f}s exceeds the {limit}s limit"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.get_closest_marker("acceptance") and report.when in ("call", "teardown"):
        ok = _OUTCOMES.get(item.nodeid, True) and report.passed
        _OUTCOMES[item.nodeid] = ok


def pytest_terminal_summary(terminalreporter):
    if not _TIMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (label, limit, elapsed) in sorted(_TIMES.items(), key=lambda kv: kv[1][0]):
        status = "PASS" if _OUTCOMES.get(nodeid) else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  ({elapsed:.2f}s, limit {limit:g}s)")
