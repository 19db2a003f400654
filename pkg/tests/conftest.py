from acceptance_log import RESULTS, line


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(RESULTS, key=lambda s: int(s[2:])):
        terminalreporter.write_line(line(name))
