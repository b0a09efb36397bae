"""Collects one verdict per acceptance criterion and prints them after the run."""

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
N_CRITERIA = 11


def pytest_terminal_summary(terminalreporter):
    ran = {r.nodeid for key, rs in terminalreporter.stats.items() if key != "deselected" for r in rs
           if "test_acceptance" in getattr(r, "nodeid", "")}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in ACCEPTANCE:
            ok, detail = ACCEPTANCE[n]
            status = "PASS" if ok else "FAIL"
        elif any(f"criterion_{n:02d}_" in node for node in ran):
            status, detail = "FAIL", "errored before reaching a verdict"
        else:
            status, detail = "----", "not run in this session"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
