def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    tr = terminalreporter
    reports = tr.stats.get("passed", []) + tr.stats.get("failed", [])
    accept = [r for r in reports if "test_acceptance" in getattr(r, "nodeid", "")]
    if not accept:
        return
    tr.write_sep("=", "acceptance criteria")
    for r in sorted(accept, key=lambda r: r.nodeid):
        status = "PASS" if r.passed else "FAIL"
        tr.write_line(f"{status}  {r.nodeid.split('::')[-1]}")
