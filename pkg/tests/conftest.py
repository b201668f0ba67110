import sys
from collections import OrderedDict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criteria: "OrderedDict[int, dict]" = OrderedDict()


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            entry = _criteria.setdefault(number, {"title": title, "tests": {}})
            entry["tests"][item.nodeid] = None


def pytest_runtest_logreport(report):
    for entry in _criteria.values():
        if report.nodeid in entry["tests"]:
            prev = entry["tests"][report.nodeid]
            failed = report.failed or (prev is False)
            if report.when == "call" or report.failed:
                entry["tests"][report.nodeid] = not failed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        results = list(entry["tests"].values())
        if any(r is None for r in results):
            status = "NOT RUN" if all(r is None for r in results) else "INCOMPLETE"
        else:
            status = "PASS" if all(results) else "FAIL"
        passed = sum(1 for r in results if r)
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}  ({passed}/{len(results)} checks)")
