"""Shared fixtures; collects acceptance results for the terminal summary."""

import time

import pytest

_ACCEPTANCE = {}


class CriterionChecks:
    """Named sub-checks of one acceptance criterion.

    Every sub-check is recorded (with the measured value) before the test
    asserts, so the summary line shows what failed and by how much.
    """

    def __init__(self, key, title):
        self.key = key
        self.title = title
        self.items = []
        self.t0 = time.perf_counter()

    def check(self, name, ok, value=""):
        self.items.append((name, bool(ok), value))
        return bool(ok)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def finish(self):
        ok = all(passed for _, passed, _ in self.items)
        _ACCEPTANCE[self.key] = (ok, self.title, list(self.items))
        failed = [f"{n} ({v})" for n, passed, v in self.items if not passed]
        assert ok, f"criterion {self.key} failed: " + "; ".join(failed)


@pytest.fixture
def criterion():
    return CriterionChecks


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def order(k):
        head, _, tail = k.partition("-")
        return (int(head), tail)

    for key in sorted(_ACCEPTANCE, key=order):
        ok, title, items = _ACCEPTANCE[key]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {title}")
        for name, passed, value in items:
            if not passed:
                tr.write_line(f"         failed: {name} = {value}")
