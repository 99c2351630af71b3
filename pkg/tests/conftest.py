import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "dqma", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("dqma")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one pass/fail line per acceptance criterion, printed in the terminal summary
CRITERIA_LINES: list[str] = []


class _Criterion:
    def __init__(self, number, title, limit=None):
        self.number, self.title, self.limit = number, title, limit
        self.detail = ""

    def __enter__(self):
        import time

        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._t0
        ok = exc_type is None
        if ok and self.limit is not None and elapsed > self.limit:
            ok = False
            self.detail += f" (runtime {elapsed:.1f}s over the {self.limit:g}s budget)"
        if exc_type is not None and not self.detail:
            self.detail = f"{exc_type.__name__}: {exc}"
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title}: {self.detail.strip()} [{elapsed:.2f}s]"
        CRITERIA_LINES.append(line)
        print(line)
        if exc_type is None and not ok:
            raise AssertionError(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
