"""Shared pytest hooks: print a one-line verdict per acceptance check."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    _ACCEPTANCE[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance summary")
    for name in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[name]
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome,
                                                           outcome.upper())
        terminalreporter.write_line(f"{name}: {verdict}")
