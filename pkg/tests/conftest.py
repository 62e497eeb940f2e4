from functools import lru_cache

import pytest
from hypothesis import HealthCheck, settings

from isocap import measure as meas

settings.register_profile("isocap", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("isocap")


@lru_cache(maxsize=None)
def builtin(kind, *args, grid_size=meas.DEFAULT_GRID):
    return meas.make_builtin(kind, *args, grid_size=grid_size)


@pytest.fixture(scope="session")
def gaussian():
    return builtin("gaussian")


@pytest.fixture(scope="session")
def uniform():
    return builtin("uniform_interval", -1.0, 1.0)


@pytest.fixture(scope="session")
def double_well():
    return builtin("double_well")


@pytest.fixture(scope="session")
def mu_alpha():
    return builtin("power_alpha", 0.5)


# one PASS/FAIL line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
