import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_ACCEPTANCE: dict[str, str] = {}


class _Criterion:
    """Collects the checks of one acceptance criterion and records a single verdict line."""

    def __init__(self, key: str, title: str):
        self.key, self.title = key, title
        self.checks: list[tuple[bool, str]] = []

    def check(self, ok, detail: str) -> bool:
        self.checks.append((bool(ok), detail))
        return bool(ok)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, AssertionError):
            self.checks.append((False, f"error: {exc_type.__name__}: {exc}"))
        ok = bool(self.checks) and all(c for c, _ in self.checks)
        detail = "; ".join(d for _, d in self.checks)
        line = f"{self.key} {'PASS' if ok else 'FAIL'} {self.title}: {detail}"
        _ACCEPTANCE[self.key] = line
        print(line)
        if exc is None:
            assert ok, line
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[2:])):
        terminalreporter.write_line(_ACCEPTANCE[key])
