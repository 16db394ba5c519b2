from __future__ import annotations

from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_CRITERIA: dict[int, list[tuple[str, str]]] = defaultdict(list)
_LINES: dict[int, list[str]] = defaultdict(list)
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    _TITLES[num] = title
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _CRITERIA[num].append((item.name, rep.outcome))
        _LINES[num] += [v for k, v in item.user_properties if k == "report"]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        results = _CRITERIA[num]
        ok = all(o == "passed" for _, o in results)
        failed = [name for name, o in results if o != "passed"]
        line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {_TITLES[num]}"
        if failed:
            line += "  [failing: " + ", ".join(failed) + "]"
        tr.write_line(line)
        for detail in _LINES[num]:
            tr.write_line("      " + detail)
