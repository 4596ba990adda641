"""Shared pytest hooks: echo the acceptance summary lines at the end."""
import sys


def pytest_terminal_summary(terminalreporter):
    for name, module in list(sys.modules.items()):
        if name.rpartition(".")[2] == "test_acceptance":
            results = getattr(module, "RESULTS", None)
            if results:
                terminalreporter.ensure_newline()
                for line in results:
                    terminalreporter.write_line(line)
            return
