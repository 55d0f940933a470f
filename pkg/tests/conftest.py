import pytest

_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    item_marker = getattr(report, "criterion_label", None)
    if item_marker is None:
        return
    detail = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
    _CRITERIA.append((item_marker, report.outcome, report.duration, detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion_label = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, duration, detail in sorted(_CRITERIA, key=lambda r: _order(r[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        extra = f"  [{detail}]" if detail else ""
        terminalreporter.write_line(f"{verdict}  {label}  ({duration:.1f}s){extra}")
    n_pass = sum(1 for r in _CRITERIA if r[1] == "passed")
    terminalreporter.write_line(f"{n_pass}/{len(_CRITERIA)} criteria passed")


def _order(label: str):
    head = label.split()[0]
    digits = "".join(c for c in head if c.isdigit())
    return (int(digits) if digits else 99, label)
