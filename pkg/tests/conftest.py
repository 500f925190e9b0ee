"""Collects the acceptance verdicts and prints them after the run."""

ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{number}] {'PASS' if passed else 'FAIL'}  {title}: {detail}")
