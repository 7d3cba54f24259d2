from __future__ import annotations

from collections import defaultdict

_outcomes: dict[int, list] = defaultdict(list)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        xfail = hasattr(report, "wasxfail")
        _outcomes[props["criterion"]].append((report.nodeid.split("::")[-1], report.outcome, xfail, props))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_outcomes):
        rows = _outcomes[n]
        failed = [r for r in rows if r[1] != "passed" or r[2]]
        status = "PASS" if not failed else "FAIL"
        shown = rows if len(rows) <= 6 else failed + rows[-1:]
        details = "; ".join(str(r[3]["measured"]) for r in shown if "measured" in r[3])
        line = f"criterion {n}: {status} ({len(rows) - len(failed)}/{len(rows)} checks)"
        if failed:
            line += " failing: " + ", ".join(r[0] + (" [known, xfail]" if r[2] else "") for r in failed)
        if details:
            line += f" | {details}"
        tr.write_line(line)
