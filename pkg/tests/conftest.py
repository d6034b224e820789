"""Shared fixtures, plus a reporter printing one `[criterion k] PASS|FAIL`
line per acceptance test (through the terminal reporter, so the lines
survive output capture)."""

from __future__ import annotations

import re
import sys

import pytest

from helpers import World

from vtl.crypto import SCHEMES, Keyring


@pytest.fixture
def stub_ring():
    return Keyring.generate(6, SCHEMES["stub"], b"test")


@pytest.fixture
def world():
    return World()


class CriterionReporter:
    """Prints one verdict line per `test_criterion_<k>` test, looking up the
    summary in the test module's CRITERIA dict."""

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
