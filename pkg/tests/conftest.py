import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# Acceptance verdicts, printed once at the end of the session.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
