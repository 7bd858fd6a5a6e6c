from __future__ import annotations

import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = getattr(item, "criterion_detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    status = "PASS" if rep.passed else "FAIL"
    prev = _RESULTS.get(number)
    if prev is not None and prev[0] == "FAIL":
        status = "FAIL"
        detail = prev[2] + (" | " + detail if detail else "")
    elif prev is not None and detail:
        detail = prev[2] + " | " + detail
    elif prev is not None:
        detail = prev[2]
    _RESULTS[number] = (status, title, detail)


@pytest.fixture
def record(request):
    """Attach a one-line detail string to the running criterion."""
    def _record(text: str):
        request.node.criterion_detail = text
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"criterion {number:>2} {status} {title}"
        if detail:
            line += f" :: {detail}"
        terminalreporter.write_line(line)
