acceptance_lines: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    """Collect one pass/fail line per acceptance criterion for the run summary."""
    acceptance_lines.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_lines):
            terminalreporter.write_line(line)
