"""Per-criterion pass/fail lines for the acceptance suite."""

import pytest

_RESULTS: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach a one-line measurement to the criterion of the running test."""
    marker = request.node.get_closest_marker("criterion")
    entry = _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "details": [], "passed": True})

    def add(text: str) -> None:
        entry["details"].append(text)

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    entry = _RESULTS.setdefault(marker.args[0], {"title": marker.args[1], "details": [], "passed": True})
    entry["passed"] = entry["passed"] and rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        e = _RESULTS[n]
        status = "PASS" if e["passed"] else "FAIL"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {e['title']}  [{detail}]")
