from __future__ import annotations

_ACCEPTANCE: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::", 1)[1]
        notes = "; ".join(str(v) for k, v in report.user_properties if k == "note")
        _ACCEPTANCE.append((name, "PASS" if report.passed else "FAIL", notes))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict, notes in _ACCEPTANCE:
        terminalreporter.write_line(f"{verdict}  {name}" + (f"  [{notes}]" if notes else ""))
    passed = sum(v == "PASS" for _, v, _ in _ACCEPTANCE)
    terminalreporter.write_line(f"{passed}/{len(_ACCEPTANCE)} acceptance checks passed")
