"""Registers the per-criterion verdict reporter for standalone runs.

Prints one `[criterion k] PASS|FAIL` line per `test_criterion_<k>` test,
through the terminal reporter so the lines survive output capture.  The
registration is guarded so running the whole repository's suite (where the
primary conftest registers the same plugin) does not double-report.
"""

import re
import sys


class CriterionReporter:
    def __init__(self, config):
        self.config = config

    def pytest_runtest_logreport(self, report):
        if report.when != "call":
            return
        m = re.search(r"(test_\w+)\.py.*test_criterion_(\d+)", report.nodeid)
        if not m:
            return
        module = sys.modules.get(m.group(1))
        summary = getattr(module, "CRITERIA", {}).get(int(m.group(2)), "")
        status = "PASS" if report.passed else "FAIL"
        tr = self.config.pluginmanager.get_plugin("terminalreporter")
        line = f"[criterion {m.group(2)}] {status}: {summary}"
        if tr is not None:
            tr.ensure_newline()
            tr.write_line(line)
        else:
            print(line, flush=True)


def pytest_configure(config):
    if not config.pluginmanager.has_plugin("criterion-reporter"):
        config.pluginmanager.register(CriterionReporter(config),
                                      "criterion-reporter")
