import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: dict[str, list[bool]] = defaultdict(list)
_titles: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(code, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    code, title = mark.args
    _titles[code] = title
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _criteria[code].append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for code in sorted(_criteria, key=lambda c: int(c[1:])):
        results = _criteria[code]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"{code} {status} {_titles[code]} ({sum(results)}/{len(results)} checks)")
