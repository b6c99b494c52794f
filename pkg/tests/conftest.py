import os

# NumPy threading is irrelevant here; the quadrature engines use SOV_THREADS
os.environ.setdefault("SOV_THREADS", "1")

# filled by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
