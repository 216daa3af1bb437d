"""Collects acceptance-criterion outcomes and prints one line per criterion."""

import pytest

_OUTCOMES = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _OUTCOMES.setdefault(number, {"title": title, "passed": True, "ran": False, "notes": []})
    if call.when == "call" or call.excinfo is not None:
        entry["ran"] = True
        if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
            entry["passed"] = False
            entry["notes"].append(f"{item.name}: {call.excinfo.exconly().splitlines()[0][:160]}")


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES, key=lambda n: (int(''.join(ch for ch in n if ch.isdigit())), n)):
        entry = _OUTCOMES[number]
        status = "PASS" if entry["passed"] and entry["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}")
        for note in entry["notes"]:
            terminalreporter.write_line(f"    {note}")
