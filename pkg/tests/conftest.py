"""Shared test plumbing: one pass/fail summary line per acceptance criterion."""

_acceptance_docs: dict[str, str] = {}
_acceptance_results: dict[str, tuple[str, str]] = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        if item.get_closest_marker("acceptance"):
            doc = (item.function.__doc__ or "").strip().splitlines()
            _acceptance_docs[item.nodeid] = doc[0] if doc else item.name


def pytest_runtest_logreport(report):
    if report.nodeid not in _acceptance_docs:
        return
    if report.when == "call":
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _acceptance_results[report.nodeid] = (outcome, _skip_reason(report))
    elif report.when == "setup" and (report.skipped or report.failed):
        outcome = "SKIP" if report.skipped else "FAIL"
        _acceptance_results[report.nodeid] = (outcome, _skip_reason(report))


def _skip_reason(report) -> str:
    if report.skipped and isinstance(report.longrepr, tuple):
        return report.longrepr[2]
    return ""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_results):
        outcome, reason = _acceptance_results[nodeid]
        line = f"{outcome:<5} {_acceptance_docs[nodeid]}"
        if reason:
            line += f"  [{reason}]"
        terminalreporter.write_line(line)
