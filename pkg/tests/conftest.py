import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def unit_square_sites():
    from maxmix.simulate import sample_sites

    return sample_sites(30, ((0.0, 1.0), (0.0, 1.0)), 11)


@pytest.fixture
def mm1_spec():
    from maxmix.models import TEG, ModelSpec, Smith

    return ModelSpec(0.5, TEG(0.2, 0.25), Smith(0.6))


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("MAXMIX_SEED", raising=False)


_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


class _Criterion:
    def __init__(self, log, number, title):
        self.log, self.number, self.title = log, number, title
        self.checks = []

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    def note(self, detail):
        """Informational detail that does not affect the verdict."""
        self.checks.append((True, detail))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            self.checks.append((False, f"{exc_type.__name__}: {exc}"))
        ok = bool(self.checks) and all(c[0] for c in self.checks)
        detail = "; ".join(d for _, d in self.checks)
        line = f"criterion {self.number} [{'PASS' if ok else 'FAIL'}] {self.title}: {detail}"
        self.log.append(line)
        print(line)
        if exc is None:
            assert ok, line
        return False


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as c: c.check(ok, detail)``; logs one line per criterion."""
    log = request.config.stash[_CRITERIA]
    return lambda number, title: _Criterion(log, number, title)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
