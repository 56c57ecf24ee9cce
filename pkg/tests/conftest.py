import sys
from pathlib import Path

# Make the oracle helpers importable as a plain module from every test file.
sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_PREFIX = "tests/test_acceptance.py::test_criterion_"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            name = nodeid.split("::", 1)[1]
            label = name.replace("test_criterion_", "criterion ").replace("_", " ")
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((name, f"ACCEPTANCE {label}: {status}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
