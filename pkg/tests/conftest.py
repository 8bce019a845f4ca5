import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA: dict = {}


class Criterion:
    """Records one acceptance line: verdict, runtime and a short detail."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.checks = []
        self.start = time.perf_counter()
        self.elapsed = None
        self.errored = False

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))
        assert ok, detail

    def line(self):
        elapsed = self.elapsed if self.elapsed is not None else time.perf_counter() - self.start
        ok = bool(self.checks) and all(c for c, _ in self.checks) and not self.errored
        details = "; ".join(d for _, d in self.checks) + ("; raised before completing" if self.errored else "")
        return f"criterion {self.number} [{'PASS' if ok else 'FAIL'}] {self.title} ({elapsed:.2f} s): {details}"


@pytest.fixture
def criterion(request):
    made = []

    def factory(number, title):
        c = Criterion(number, title)
        made.append(c)
        CRITERIA[number] = c
        return c

    yield factory
    failed = getattr(request.node, "rep_call", None) is not None and request.node.rep_call.failed
    for c in made:
        c.elapsed = time.perf_counter() - c.start
        c.errored = failed and all(ok for ok, _ in c.checks)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n].line())
