import _support


def pytest_terminal_summary(terminalreporter):
    if not _support.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_support.ACCEPTANCE):
        terminalreporter.write_line(line)
